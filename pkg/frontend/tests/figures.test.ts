import { existsSync, mkdtempSync, readFileSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';
import { plot } from '../src/plot';
import { renderPurity, labelFor } from '../src/kinds/purity';
import { renderEnergy, DRIFT_BAND } from '../src/kinds/energy';
import { renderPhase } from '../src/kinds/phase';
import { renderScan } from '../src/kinds/scan';
import { column, readTable } from '../src/csv';
import { STYLE } from '../src/style';

const FIXTURES = join(__dirname, '..', 'fixtures');
const GOLDEN = join(__dirname, 'golden');
const RUNS = ['ehrenfest', 'meanfield', 'regularized'].map((d) => join(FIXTURES, d, 'run.csv'));

// regenerate with UPDATE_GOLDEN=1 npx vitest run
function checkGolden(name: string, svg: string): void {
  const path = join(GOLDEN, name);
  if (process.env.UPDATE_GOLDEN === '1') {
    writeFileSync(path, svg);
    return;
  }
  expect(existsSync(path), `golden file ${name} missing; run with UPDATE_GOLDEN=1`).toBe(true);
  expect(svg).toBe(readFileSync(path, 'utf8'));
}

function tmpFile(name: string): string {
  return join(mkdtempSync(join(tmpdir(), 'plotkit-')), name);
}

describe('purity overlay', () => {
  it('derives curve labels from run directories', () => {
    expect(labelFor('runs/ehrenfest/run.csv')).toBe('ehrenfest');
    expect(labelFor('out/other.csv')).toBe('other');
    expect(labelFor('run.csv')).toBe('run');
  });

  it('regenerates the golden overlay byte for byte', () => {
    const svg = renderPurity(RUNS);
    expect(svg).toContain('>ehrenfest</text>');
    expect(svg).toContain('>meanfield</text>');
    expect(svg).toContain('>regularized</text>');
    expect((svg.match(/<polyline /g) ?? []).length).toBe(3);
    checkGolden('purity.svg', svg);
  });

  it('is idempotent through plot()', () => {
    const out1 = tmpFile('p1.svg');
    const out2 = tmpFile('p2.svg');
    plot({ kind: 'purity', inputs: RUNS, output: out1 });
    plot({ kind: 'purity', inputs: RUNS, output: out2 });
    expect(readFileSync(out1, 'utf8')).toBe(readFileSync(out2, 'utf8'));
    expect(readFileSync(out1, 'utf8')).toBe(renderPurity(RUNS));
  });
});

describe('energy drift', () => {
  const input = join(FIXTURES, 'regularized', 'run.csv');

  it('stays inside the 1e-6 band for the conserved fixture run', () => {
    const table = readTable(input, ['t', 'energy']);
    const energy = column(table, 'energy');
    const worst = Math.max(...energy.map((e) => Math.abs(e - energy[0]) / Math.abs(energy[0])));
    expect(worst).toBeLessThan(DRIFT_BAND);

    // the drawn curve must sit inside the drawn band, pixel-wise
    const svg = renderEnergy(input);
    const band = svg.match(/<rect x="[\d.]+" y="([\d.]+)" width="[\d.]+" height="([\d.]+)" fill="#f5c96e"/);
    expect(band).not.toBeNull();
    const bandTop = parseFloat(band![1]);
    const bandBot = bandTop + parseFloat(band![2]);
    const line = svg.match(/<polyline points="([^"]+)"/);
    expect(line).not.toBeNull();
    for (const pt of line![1].split(' ')) {
      const y = parseFloat(pt.split(',')[1]);
      expect(y).toBeGreaterThanOrEqual(bandTop - 0.01);
      expect(y).toBeLessThanOrEqual(bandBot + 0.01);
    }
  });

  it('regenerates the golden drift figure byte for byte', () => {
    checkGolden('energy.svg', renderEnergy(input));
  });
});

describe('phase portrait', () => {
  const input = join(FIXTURES, 'ehrenfest', 'trajectories.csv');

  it('draws one curve per trajectory', () => {
    const svg = renderPhase(input);
    expect(svg).toContain('8 trajectories');
    expect((svg.match(/<polyline /g) ?? []).length).toBe(8);
    checkGolden('phase.svg', svg);
  });
});

describe('scan summary', () => {
  const input = join(FIXTURES, 'scan_alpha', 'index.csv');

  it('renders drift and purity panels against the scanned value', () => {
    const svg = renderScan(input);
    expect(svg).toContain('scan: alpha');
    expect(svg).toContain('|energy drift|');
    expect(svg).toContain('max purity change');
    checkGolden('scan.svg', svg);
  });

  it('skips failed values and reports the count', () => {
    const header =
      'param,value,status,run_dir,error,t_final,energy_first,energy_last,energy_drift_rel,' +
      'purity_first,purity_last,purity_change_max,rho_min_eig_min,norm_dev_max,traj_purity_dev_max';
    const rows = [
      'alpha,0.5,ok,alpha_0.5,,1.0,1.58,1.58,3.2e-13,1.0,0.96,0.04,-1e-16,2e-15,3e-15',
      'alpha,2.0,error,alpha_2,margin violated,,,,,,,,,,',
      'alpha,0.7,ok,alpha_0.7,,1.0,1.58,1.58,5.1e-13,1.0,0.97,0.03,-1e-16,2e-15,3e-15',
    ];
    const path = tmpFile('index.csv');
    writeFileSync(path, header + '\n' + rows.join('\n') + '\n');
    const svg = renderScan(path);
    expect(svg).toContain('2 ok, 1 failed');
    // two ok values, two panels: four marker dots with series colors
    const markers = (svg.match(new RegExp(`r="${STYLE.markerRadius}"`, 'g')) ?? []).length;
    expect(markers).toBe(4);
  });

  it('fails when every scan value errored', () => {
    const path = tmpFile('index.csv');
    writeFileSync(
      path,
      'param,value,status,run_dir,error,t_final,energy_first,energy_last,energy_drift_rel,' +
        'purity_first,purity_last,purity_change_max,rho_min_eig_min,norm_dev_max,traj_purity_dev_max\n' +
        'alpha,2.0,error,alpha_2,margin violated,,,,,,,,,,\n'
    );
    expect(() => renderScan(path)).toThrow(/no successful rows/);
  });
});

import { mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';
import { InputError, column, readTable } from '../src/csv';

const FIXTURES = join(__dirname, '..', 'fixtures');

function tmpCsv(name: string, text: string): string {
  const dir = mkdtempSync(join(tmpdir(), 'plotkit-'));
  const path = join(dir, name);
  writeFileSync(path, text);
  return path;
}

describe('readTable', () => {
  it('parses a run.csv fixture with typed cells', () => {
    const table = readTable(join(FIXTURES, 'ehrenfest', 'run.csv'), ['t', 'energy', 'purity']);
    expect(table.columns).toContain('rho_min_eig');
    expect(table.rows.length).toBeGreaterThan(10);
    expect(typeof table.rows[0].t).toBe('number');
    const t = column(table, 't');
    expect(t[0]).toBe(0);
    for (let i = 1; i < t.length; i++) {
      expect(t[i]).toBeGreaterThan(t[i - 1]);
    }
  });

  it('names the missing column on schema mismatch', () => {
    const path = tmpCsv('bad.csv', 't,norm\n0.0,1.0\n');
    expect(() => readTable(path, ['t', 'purity'])).toThrow(/missing column "purity"/);
    expect(() => readTable(path, ['t', 'purity'])).toThrow(InputError);
  });

  it('rejects a header-only file with a no-rows error', () => {
    const path = tmpCsv('empty.csv', 't,energy,purity\n');
    expect(() => readTable(path, ['t'])).toThrow(/no rows/);
  });

  it('rejects a zero-byte file with a no-rows error', () => {
    const path = tmpCsv('void.csv', '');
    expect(() => readTable(path, ['t'])).toThrow(/no rows/);
  });

  it('reports missing files by path', () => {
    expect(() => readTable('/nonexistent/run.csv', ['t'])).toThrow(/input not found: \/nonexistent\/run.csv/);
  });

  it('maps non-numeric cells to NaN', () => {
    const path = tmpCsv('mixed.csv', 'a,b\n1,x\n2,\n');
    const table = readTable(path, ['a', 'b']);
    expect(column(table, 'a')).toEqual([1, 2]);
    expect(column(table, 'b').every(Number.isNaN)).toBe(true);
  });
});

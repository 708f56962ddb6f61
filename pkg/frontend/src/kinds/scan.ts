import { InputError, readTable } from '../csv';
import { STYLE } from '../style';
import { PanelBox, renderPanel, renderTitle, svgDoc } from '../chart';

/**
 * Scan summary from index.csv: endpoint energy drift and decoherence signal
 * against the scanned value. Failed scan values are skipped, not fatal.
 */
export function renderScan(input: string): string {
  const table = readTable(input, ['param', 'value', 'status', 'energy_drift_rel', 'purity_change_max']);
  const ok = table.rows.filter((r) => r.status === 'ok');
  if (ok.length === 0) {
    throw new InputError(`no successful rows in ${input}`);
  }
  const failed = table.rows.length - ok.length;
  const param = String(table.rows[0].param);
  const points = ok
    .map((r) => ({
      value: Number(r.value),
      drift: Math.abs(Number(r.energy_drift_rel)),
      purity: Number(r.purity_change_max),
    }))
    .filter((p) => Number.isFinite(p.value))
    .sort((a, b) => a.value - b.value);

  const m = STYLE.margin;
  const w = STYLE.width - m.left - m.right;
  const h = (STYLE.height - m.top - m.bottom - 46) / 2;
  const top: PanelBox = { x: m.left, y: m.top, w, h };
  const bottom: PanelBox = { x: m.left, y: m.top + h + 46, w, h };

  const body = [
    renderTitle(`scan: ${param}`, failed > 0 ? `${ok.length} ok, ${failed} failed` : ''),
    renderPanel({
      box: top,
      xLabel: param,
      yLabel: '|energy drift|',
      series: [
        {
          label: 'drift',
          x: points.map((p) => p.value),
          y: points.map((p) => p.drift),
          color: STYLE.palette[0],
          markers: true,
        },
      ],
    }),
    renderPanel({
      box: bottom,
      xLabel: param,
      yLabel: 'max purity change',
      series: [
        {
          label: 'purity',
          x: points.map((p) => p.value),
          y: points.map((p) => p.purity),
          color: STYLE.palette[1],
          markers: true,
        },
      ],
    }),
  ].join('\n');
  return svgDoc(body);
}

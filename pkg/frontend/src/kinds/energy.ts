import { readTable, column } from '../csv';
import { STYLE } from '../style';
import { mainBox, renderPanel, renderTitle, svgDoc } from '../chart';

/** Advertised conservation corridor; the band drawn around zero drift. */
export const DRIFT_BAND = 1e-6;

/** Relative energy drift (e(t) - e(0)) / |e(0)| against time, with band. */
export function renderEnergy(input: string): string {
  const table = readTable(input, ['t', 'energy']);
  const t = column(table, 't');
  const energy = column(table, 'energy');
  const e0 = energy[0];
  const denom = Math.abs(e0) || 1;
  const drift = energy.map((e) => (e - e0) / denom);
  const worst = Math.max(...drift.map(Math.abs));

  // keep the band inside the frame even when the drift is orders smaller
  const half = Math.max(1.25 * DRIFT_BAND, 1.2 * worst);
  const body = [
    renderTitle(
      'relative energy drift',
      `band: +/-${DRIFT_BAND.toExponential(0)}, max |drift| = ${worst.toExponential(2)}`
    ),
    renderPanel({
      box: mainBox(),
      xLabel: 't',
      yLabel: '(e - e0) / |e0|',
      series: [{ label: 'drift', x: t, y: drift, color: STYLE.palette[0] }],
      band: { lo: -DRIFT_BAND, hi: DRIFT_BAND },
      yDomain: [-half, half],
    }),
  ].join('\n');
  return svgDoc(body);
}

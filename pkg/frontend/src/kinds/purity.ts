import { basename, dirname } from 'path';
import { readTable, column } from '../csv';
import { STYLE } from '../style';
import { SeriesSpec, mainBox, renderLegend, renderPanel, renderTitle, svgDoc } from '../chart';

/** "runs/ehrenfest/run.csv" -> "ehrenfest"; anything else -> file stem. */
export function labelFor(path: string): string {
  const stem = basename(path).replace(/\.csv$/i, '');
  if (stem !== 'run') return stem;
  const dir = basename(dirname(path));
  return dir === '' || dir === '.' ? stem : dir;
}

/** Ensemble purity against time, one labeled curve per run.csv. */
export function renderPurity(inputs: string[]): string {
  const series: SeriesSpec[] = inputs.map((path, i) => {
    const table = readTable(path, ['t', 'purity']);
    return {
      label: labelFor(path),
      x: column(table, 't'),
      y: column(table, 'purity'),
      color: STYLE.palette[i % STYLE.palette.length],
    };
  });
  const body = [
    renderTitle('ensemble purity'),
    renderLegend(series, STYLE.margin.left, 40),
    renderPanel({ box: mainBox(), xLabel: 't', yLabel: 'Tr(rho^2)', series }),
  ].join('\n');
  return svgDoc(body);
}

import { readTable } from '../csv';
import { STYLE } from '../style';
import { el } from '../svg';
import { scaled, padded, extent, Scale } from '../scale';
import { SeriesSpec, mainBox, renderPanel, renderTitle, svgDoc } from '../chart';

/** Phase portrait: one (q, p) curve per trajectory, dot at the start point. */
export function renderPhase(input: string): string {
  const table = readTable(input, ['t', 'traj', 'q', 'p']);
  const byTraj = new Map<number, { q: number[]; p: number[] }>();
  for (const row of table.rows) {
    const id = Number(row.traj);
    const q = Number(row.q);
    const p = Number(row.p);
    if (!Number.isFinite(id) || !Number.isFinite(q) || !Number.isFinite(p)) continue;
    let curve = byTraj.get(id);
    if (!curve) {
      curve = { q: [], p: [] };
      byTraj.set(id, curve);
    }
    curve.q.push(q);
    curve.p.push(p);
  }
  const ids = [...byTraj.keys()].sort((a, b) => a - b);
  const series: SeriesSpec[] = ids.map((id, i) => {
    const curve = byTraj.get(id)!;
    return { label: `traj ${id}`, x: curve.q, y: curve.p, color: STYLE.palette[i % STYLE.palette.length] };
  });

  const box = mainBox();
  const xDom = padded(extent(series.flatMap((s) => s.x)), 0.02);
  const yDom = padded(extent(series.flatMap((s) => s.y)), 0.08);
  const sx: Scale = { domain: xDom, range: [box.x, box.x + box.w] };
  const sy: Scale = { domain: yDom, range: [box.y + box.h, box.y] };
  const startDots = series
    .filter((s) => s.x.length > 0)
    .map((s) =>
      el('circle', {
        cx: scaled(sx, s.x[0]),
        cy: scaled(sy, s.y[0]),
        r: String(STYLE.markerRadius + 1),
        fill: s.color,
      })
    );

  const body = [
    renderTitle('phase portrait', `${ids.length} ${ids.length === 1 ? 'trajectory' : 'trajectories'}`),
    renderPanel({ box, xLabel: 'q', yLabel: 'p', series, yDomain: yDom }),
    ...startDots,
  ].join('\n');
  return svgDoc(body);
}

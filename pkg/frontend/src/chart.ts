import { STYLE } from './style';
import { el, esc, px } from './svg';
import { Scale, scaled, niceTicks, extent, padded, fmtNum } from './scale';

export interface SeriesSpec {
  label: string;
  x: number[];
  y: number[];
  color: string;
  markers?: boolean;
}

export interface PanelBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface PanelSpec {
  box: PanelBox;
  xLabel: string;
  yLabel: string;
  series: SeriesSpec[];
  /** Horizontal reference band, e.g. a tolerance corridor around zero. */
  band?: { lo: number; hi: number };
  yDomain?: [number, number];
}

const FS = String(STYLE.fontSize);

function seriesPoints(s: SeriesSpec, sx: Scale, sy: Scale): string[] {
  const pts: string[] = [];
  for (let i = 0; i < s.x.length; i++) {
    if (!Number.isFinite(s.x[i]) || !Number.isFinite(s.y[i])) continue;
    pts.push(`${px(scaled(sx, s.x[i]))},${px(scaled(sy, s.y[i]))}`);
  }
  return pts;
}

/** Axes, grid, optional band, and line series inside one plot rectangle. */
export function renderPanel(spec: PanelSpec): string {
  const { box } = spec;
  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s) => s.y);
  if (spec.band) ys.push(spec.band.lo, spec.band.hi);
  const xDom = padded(extent(xs), 0.02);
  const yDom = spec.yDomain ?? padded(extent(ys), 0.08);
  const sx: Scale = { domain: xDom, range: [box.x, box.x + box.w] };
  const sy: Scale = { domain: yDom, range: [box.y + box.h, box.y] };

  const parts: string[] = [];
  if (spec.band) {
    const top = scaled(sy, spec.band.hi);
    const bot = scaled(sy, spec.band.lo);
    parts.push(
      el('rect', {
        x: box.x,
        y: top,
        width: box.w,
        height: bot - top,
        fill: STYLE.bandFill,
        'fill-opacity': String(STYLE.bandOpacity),
      })
    );
  }

  const xTicks = niceTicks(xDom[0], xDom[1], 6);
  const yTicks = niceTicks(yDom[0], yDom[1], 5);
  for (const t of xTicks) {
    const x = scaled(sx, t);
    parts.push(el('line', { x1: x, y1: box.y, x2: x, y2: box.y + box.h, stroke: STYLE.gridColor }));
    parts.push(
      el(
        'text',
        { x, y: box.y + box.h + 16, 'font-size': FS, fill: STYLE.textColor, 'text-anchor': 'middle' },
        esc(fmtNum(t))
      )
    );
  }
  for (const t of yTicks) {
    const y = scaled(sy, t);
    parts.push(el('line', { x1: box.x, y1: y, x2: box.x + box.w, y2: y, stroke: STYLE.gridColor }));
    parts.push(
      el(
        'text',
        { x: box.x - 8, y: y + 4, 'font-size': FS, fill: STYLE.textColor, 'text-anchor': 'end' },
        esc(fmtNum(t))
      )
    );
  }

  parts.push(
    el('line', { x1: box.x, y1: box.y, x2: box.x, y2: box.y + box.h, stroke: STYLE.axisColor }),
    el('line', { x1: box.x, y1: box.y + box.h, x2: box.x + box.w, y2: box.y + box.h, stroke: STYLE.axisColor })
  );

  for (const s of spec.series) {
    const pts = seriesPoints(s, sx, sy);
    if (pts.length > 1) {
      parts.push(
        el('polyline', {
          points: pts.join(' '),
          fill: 'none',
          stroke: s.color,
          'stroke-width': String(STYLE.lineWidth),
        })
      );
    }
    if (s.markers || pts.length === 1) {
      for (const p of pts) {
        const [cx, cy] = p.split(',');
        parts.push(el('circle', { cx, cy, r: String(STYLE.markerRadius), fill: s.color }));
      }
    }
  }

  parts.push(
    el(
      'text',
      {
        x: box.x + box.w / 2,
        y: box.y + box.h + 36,
        'font-size': FS,
        fill: STYLE.textColor,
        'text-anchor': 'middle',
      },
      esc(spec.xLabel)
    ),
    el(
      'text',
      {
        x: box.x - 48,
        y: box.y + box.h / 2,
        'font-size': FS,
        fill: STYLE.textColor,
        'text-anchor': 'middle',
        transform: `rotate(-90 ${px(box.x - 48)} ${px(box.y + box.h / 2)})`,
      },
      esc(spec.yLabel)
    )
  );
  return parts.join('\n');
}

export function renderLegend(entries: { label: string; color: string }[], x: number, y: number): string {
  const parts: string[] = [];
  let cx = x;
  for (const e of entries) {
    parts.push(
      el('line', { x1: cx, y1: y, x2: cx + 18, y2: y, stroke: e.color, 'stroke-width': String(STYLE.lineWidth) }),
      el('text', { x: cx + 23, y: y + 4, 'font-size': FS, fill: STYLE.textColor }, esc(e.label))
    );
    cx += 23 + e.label.length * 7 + 18;
  }
  return parts.join('\n');
}

export function renderTitle(text: string, subtitle = ''): string {
  const parts = [
    el(
      'text',
      {
        x: STYLE.width / 2,
        y: 22,
        'font-size': String(STYLE.titleSize),
        'font-weight': 'bold',
        fill: STYLE.textColor,
        'text-anchor': 'middle',
      },
      esc(text)
    ),
  ];
  if (subtitle !== '') {
    parts.push(
      el(
        'text',
        { x: STYLE.width / 2, y: 38, 'font-size': FS, fill: STYLE.textColor, 'text-anchor': 'middle' },
        esc(subtitle)
      )
    );
  }
  return parts.join('\n');
}

export function svgDoc(body: string): string {
  const { width, height } = STYLE;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="${STYLE.fontFamily}">\n` +
    el('rect', { x: 0, y: 0, width, height, fill: STYLE.background }) +
    '\n' +
    body +
    '\n</svg>\n'
  );
}

/** The single full-width plot rectangle used by one-panel figures. */
export function mainBox(): PanelBox {
  const m = STYLE.margin;
  return { x: m.left, y: m.top, w: STYLE.width - m.left - m.right, h: STYLE.height - m.top - m.bottom };
}

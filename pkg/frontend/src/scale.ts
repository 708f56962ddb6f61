/**
 * Linear scales, round-number ticks, and a stable tick formatter.
 *
 * Everything here is a pure function of its arguments; no locale, no Date,
 * no randomness. JS number-to-string is fully specified, so rendered
 * coordinates and labels are reproducible byte for byte.
 */

export interface Scale {
  domain: [number, number];
  range: [number, number];
}

export function scaled(s: Scale, v: number): number {
  const [d0, d1] = s.domain;
  const [r0, r1] = s.range;
  const t = d1 === d0 ? 0.5 : (v - d0) / (d1 - d0);
  return r0 + t * (r1 - r0);
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) throw new Error('extent of empty data');
  return [lo, hi];
}

export function padded([lo, hi]: [number, number], frac: number): [number, number] {
  if (lo === hi) {
    const d = (Math.abs(lo) || 1) * Math.max(frac, 0.05);
    return [lo - d, hi + d];
  }
  const d = (hi - lo) * frac;
  return [lo - d, hi + d];
}

/** Ticks at multiples of 1, 2 or 5 times a power of ten covering [lo, hi]. */
export function niceTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) return [lo];
  const step0 = (hi - lo) / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  let step = mag * 10;
  for (const c of [1, 2, 5]) {
    if (mag * c >= step0) {
      step = mag * c;
      break;
    }
  }
  const out: number[] = [];
  for (let i = Math.ceil(lo / step); i <= Math.floor(hi / step); i++) {
    out.push(i * step);
  }
  return out.length > 0 ? out : [lo];
}

/** Shortest readable form: plain decimals mid-range, trimmed exponent outside. */
export function fmtNum(x: number): string {
  if (x === 0) return '0';
  const ax = Math.abs(x);
  if (ax >= 1e-4 && ax < 1e6) {
    return String(parseFloat(x.toPrecision(8)));
  }
  return x.toExponential(6).replace(/\.?0+e/, 'e');
}

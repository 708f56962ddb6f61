/**
 * Fixed style config. Every figure is rendered from these constants and the
 * input rows alone, so identical inputs always produce identical bytes.
 */

export const STYLE = {
  width: 640,
  height: 420,
  margin: { top: 56, right: 18, bottom: 46, left: 70 },
  background: '#ffffff',
  axisColor: '#444444',
  gridColor: '#e4e4e4',
  textColor: '#222222',
  fontFamily: 'Helvetica, Arial, sans-serif',
  fontSize: 12,
  titleSize: 14,
  lineWidth: 1.5,
  markerRadius: 2.5,
  palette: [
    '#1f77b4',
    '#d62728',
    '#2ca02c',
    '#9467bd',
    '#ff7f0e',
    '#8c564b',
    '#17becf',
    '#e377c2',
  ],
  bandFill: '#f5c96e',
  bandOpacity: 0.35,
};

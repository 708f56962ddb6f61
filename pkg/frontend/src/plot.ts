import { writeFileSync } from 'fs';
import { FigureSpec, validateSpec } from './figure';
import { renderPurity } from './kinds/purity';
import { renderPhase } from './kinds/phase';
import { renderEnergy } from './kinds/energy';
import { renderScan } from './kinds/scan';

/** Render one figure to spec.output. Same spec, same bytes: safe to rerun. */
export function plot(spec: FigureSpec): void {
  validateSpec(spec);
  let svg: string;
  switch (spec.kind) {
    case 'purity':
      svg = renderPurity(spec.inputs);
      break;
    case 'phase':
      svg = renderPhase(spec.inputs[0]);
      break;
    case 'energy':
      svg = renderEnergy(spec.inputs[0]);
      break;
    case 'scan':
      svg = renderScan(spec.inputs[0]);
      break;
  }
  writeFileSync(spec.output, svg);
}

import { existsSync } from 'fs';
import { InputError } from './csv';

export type FigureKind = 'purity' | 'phase' | 'energy' | 'scan';

export const FIGURE_KINDS: FigureKind[] = ['purity', 'phase', 'energy', 'scan'];

export interface FigureSpec {
  kind: FigureKind;
  /** Input CSV paths. purity overlays take several, the others exactly one. */
  inputs: string[];
  /** Output image path (SVG). */
  output: string;
}

export function validateSpec(spec: FigureSpec): void {
  if (!FIGURE_KINDS.includes(spec.kind)) {
    throw new InputError(`unknown figure kind: ${spec.kind}`);
  }
  if (spec.inputs.length === 0) {
    throw new InputError('no input files given');
  }
  for (const p of spec.inputs) {
    if (!existsSync(p)) {
      throw new InputError(`input not found: ${p}`);
    }
  }
  if (spec.kind !== 'purity' && spec.inputs.length !== 1) {
    throw new InputError(`${spec.kind} figure takes exactly one input CSV`);
  }
  if (spec.output === '') {
    throw new InputError('empty output path');
  }
}

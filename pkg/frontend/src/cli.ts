#!/usr/bin/env node
import yargs from 'yargs';
import { InputError } from './csv';
import { FIGURE_KINDS, FigureKind, FigureSpec } from './figure';
import { plot } from './plot';

interface Args {
  kind: string;
  in: string[];
  out: string;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = yargs(argv)
      .usage('plot --kind {purity,phase,energy,scan} --in FILE [FILE...] --out FILE')
      .option('kind', { type: 'string', choices: FIGURE_KINDS, demandOption: true, describe: 'figure kind' })
      .option('in', { type: 'string', array: true, demandOption: true, describe: 'input CSV file(s)' })
      .option('out', { type: 'string', demandOption: true, describe: 'output SVG path' })
      .strict()
      .exitProcess(false)
      .fail((msg, err) => {
        throw err ?? new InputError(msg);
      })
      .parseSync() as unknown as Args;
  } catch (e) {
    console.error(`plot: ${(e as Error).message}`);
    return 2;
  }

  const spec: FigureSpec = { kind: args.kind as FigureKind, inputs: args.in, output: args.out };
  try {
    plot(spec);
  } catch (e) {
    if (e instanceof InputError) {
      console.error(`plot: ${e.message}`);
      return 2;
    }
    console.error(`plot: ${(e as Error).message}`);
    return 1;
  }
  console.log(`wrote ${spec.output}`);
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}

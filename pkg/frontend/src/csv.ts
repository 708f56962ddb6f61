import { readFileSync } from 'fs';
import { parse } from 'papaparse';

/** Bad input (missing file, empty table, wrong schema). CLI exits 2 on these. */
export class InputError extends Error {}

export interface Table {
  path: string;
  columns: string[];
  rows: Record<string, unknown>[];
}

/**
 * Read a headered CSV and check it carries the columns a figure needs.
 * Cells are typed by value (numbers become numbers, the rest stay strings).
 */
export function readTable(path: string, required: string[]): Table {
  let text: string;
  try {
    text = readFileSync(path, 'utf8');
  } catch {
    throw new InputError(`input not found: ${path}`);
  }
  const parsed = parse<Record<string, unknown>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  const rows = parsed.data;
  if (rows.length === 0) {
    throw new InputError(`no rows in ${path}`);
  }
  const columns = parsed.meta.fields ?? [];
  for (const col of required) {
    if (!columns.includes(col)) {
      throw new InputError(`schema mismatch in ${path}: missing column "${col}"`);
    }
  }
  return { path, columns, rows };
}

/** One column as numbers; non-numeric cells become NaN for callers to drop. */
export function column(table: Table, name: string): number[] {
  return table.rows.map((r) => {
    const v = r[name];
    return typeof v === 'number' ? v : NaN;
  });
}

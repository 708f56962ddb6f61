/**
 * Minimal SVG string assembly.
 *
 * Attributes render in the order given, numeric values go through px(), and
 * text is escaped, so the output depends only on the call arguments.
 */

export function px(v: number): string {
  const s = v.toFixed(2);
  return s === '-0.00' ? '0.00' : s;
}

export function esc(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function el(
  tag: string,
  attrs: Record<string, string | number>,
  body = ''
): string {
  const parts: string[] = [tag];
  for (const [key, value] of Object.entries(attrs)) {
    parts.push(`${key}="${typeof value === 'number' ? px(value) : esc(value)}"`);
  }
  const open = `<${parts.join(' ')}`;
  return body === '' ? `${open}/>` : `${open}>${body}</${tag}>`;
}

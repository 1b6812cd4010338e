/** Sortable name/value feature table rendered as an HTML string. */

export type SortKey = "name" | "value";

export function featureRows(
  names: string[],
  values: number[],
  sortKey: SortKey = "name",
  descending = false,
): Array<[string, number]> {
  const rows: Array<[string, number]> = names.map((n, i) => [n, values[i]]);
  rows.sort((a, b) => {
    const cmp = sortKey === "name" ? a[0].localeCompare(b[0]) : a[1] - b[1];
    return descending ? -cmp : cmp;
  });
  return rows;
}

export function renderFeatureTable(
  names: string[],
  values: number[],
  sortKey: SortKey = "name",
  descending = false,
): string {
  const rows = featureRows(names, values, sortKey, descending)
    .map(([n, v]) => `<tr><td>${escapeHtml(n)}</td><td class="num">${formatValue(v)}</td></tr>`)
    .join("");
  return (
    `<table class="features"><thead><tr>` +
    `<th data-sort="name">feature</th><th data-sort="value">value</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function formatValue(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e6 || a < 1e-4)) return v.toExponential(4);
  return String(Math.round(v * 1e6) / 1e6);
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

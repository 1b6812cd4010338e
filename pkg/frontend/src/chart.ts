/**
 * Dependency-free SVG line chart for the SDR trajectory.
 *
 * A dashed reference line marks SDR = 1, the rate expected from the
 * confidences alone; the polyline carries one vertex per server value.
 */

export interface ChartSpec {
  width: number;
  height: number;
  pad: number;
}

const DEFAULT_SPEC: ChartSpec = { width: 560, height: 220, pad: 32 };

export function chartPoints(history: number[], spec: ChartSpec = DEFAULT_SPEC): Array<[number, number]> {
  const { width, height, pad } = spec;
  if (history.length === 0) return [];
  const maxY = Math.max(1.5, ...history.filter((v) => Number.isFinite(v))) * 1.05;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const stepX = history.length > 1 ? innerW / (history.length - 1) : 0;
  return history.map((v, i) => {
    const x = pad + (history.length > 1 ? i * stepX : innerW / 2);
    const y = pad + innerH - (Math.min(v, maxY) / maxY) * innerH;
    return [round2(x), round2(y)];
  });
}

export function referenceY(history: number[], spec: ChartSpec = DEFAULT_SPEC): number {
  const { height, pad } = spec;
  const maxY = Math.max(1.5, ...history.filter((v) => Number.isFinite(v))) * 1.05;
  const innerH = height - 2 * pad;
  return round2(pad + innerH - (1.0 / maxY) * innerH);
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

export function renderChartSvg(history: number[], spec: ChartSpec = DEFAULT_SPEC): string {
  const { width, height, pad } = spec;
  const pts = chartPoints(history, spec);
  const refY = referenceY(history, spec);
  const axis =
    `<line x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}" class="axis"/>` +
    `<line x1="${pad}" y1="${pad}" x2="${pad}" y2="${height - pad}" class="axis"/>`;
  const reference =
    `<line x1="${pad}" y1="${refY}" x2="${width - pad}" y2="${refY}" class="reference"/>` +
    `<text x="${width - pad + 4}" y="${refY + 4}" class="reference-label">1</text>`;
  let series = "";
  if (pts.length === 1) {
    series = `<circle cx="${pts[0][0]}" cy="${pts[0][1]}" r="3" class="marker"/>`;
  } else if (pts.length > 1) {
    const path = pts.map(([x, y]) => `${x},${y}`).join(" ");
    series = `<polyline points="${path}" class="series"/>`;
  }
  return (
    `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="SDR per step">` +
    axis +
    reference +
    series +
    `</svg>`
  );
}

/**
 * Minimal deterministic SVG assembly.  All coordinates are emitted with a
 * fixed number of decimals so identical inputs always produce an
 * identical byte stream (the tests hash the output).
 */

const DECIMALS = 2;

export function fmt(x: number): string {
  // avoid "-0.00"
  const s = x.toFixed(DECIMALS);
  return s === "-0.00" ? "0.00" : s;
}

export interface Scale {
  (x: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const f = ((x: number) => r0 + ((x - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const lo = Math.log10(Math.max(domain[0], Number.MIN_VALUE));
  const hi = Math.log10(Math.max(domain[1], Number.MIN_VALUE));
  const inner = linearScale([lo, hi], range);
  const f = ((x: number) => inner(Math.log10(Math.max(x, Number.MIN_VALUE)))) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

/** Round tick positions covering [lo, hi] with roughly `count` steps. */
export function linearTicks(lo: number, hi: number, count = 5): number[] {
  if (hi <= lo) return [lo];
  const raw = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1) * mag;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return ticks;
}

export function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  const first = Math.ceil(Math.log10(Math.max(lo, Number.MIN_VALUE)));
  const last = Math.floor(Math.log10(Math.max(hi, Number.MIN_VALUE)));
  for (let e = first; e <= last; e++) ticks.push(Math.pow(10, e));
  return ticks.length > 0 ? ticks : [lo];
}

function tickLabel(t: number): string {
  if (t !== 0 && (Math.abs(t) < 1e-3 || Math.abs(t) >= 1e4)) {
    return t.toExponential(0).replace("+", "");
  }
  const s = t.toPrecision(4);
  return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
}

export class SvgDoc {
  readonly width: number;
  readonly height: number;
  private parts: string[] = [];

  constructor(width = 640, height = 480) {
    this.width = width;
    this.height = height;
  }

  add(element: string): void {
    this.parts.push(element);
  }

  polyline(pts: [number, number][], attrs: string): void {
    const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polyline points="${coords}" fill="none" ${attrs}/>`);
  }

  polygon(pts: [number, number][], attrs: string): void {
    const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polygon points="${coords}" ${attrs}/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, attrs: string): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ${attrs}/>`,
    );
  }

  circle(cx: number, cy: number, r: number, attrs: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" ${attrs}/>`);
  }

  text(x: number, y: number, content: string, attrs = ""): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="sans-serif" font-size="11" ${attrs}>${content}</text>`,
    );
  }

  /** Frame, tick marks, and axis labels for a standard 2D chart. */
  axes(
    xs: Scale,
    ys: Scale,
    xticks: number[],
    yticks: number[],
    xlabel: string,
    ylabel: string,
  ): void {
    const [x0, x1] = xs.range;
    const [y0, y1] = ys.range; // y0 is the bottom (larger pixel value)
    this.add(
      `<rect x="${fmt(x0)}" y="${fmt(y1)}" width="${fmt(x1 - x0)}" height="${fmt(
        y0 - y1,
      )}" fill="none" stroke="#000"/>`,
    );
    for (const t of xticks) {
      const px = xs(t);
      this.line(px, y0, px, y0 + 5, 'stroke="#000"');
      this.text(px, y0 + 17, tickLabel(t), 'text-anchor="middle"');
    }
    for (const t of yticks) {
      const py = ys(t);
      this.line(x0 - 5, py, x0, py, 'stroke="#000"');
      this.text(x0 - 8, py + 4, tickLabel(t), 'text-anchor="end"');
    }
    this.text((x0 + x1) / 2, y0 + 34, xlabel, 'text-anchor="middle"');
    this.text(
      14,
      (y0 + y1) / 2,
      ylabel,
      `text-anchor="middle" transform="rotate(-90 14 ${fmt((y0 + y1) / 2)})"`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

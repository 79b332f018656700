/**
 * Minimal deterministic SVG line charts: axes, ticks, legend, reference
 * lines, linear or log10 y-scale.  No timestamps or randomness, so equal
 * inputs produce byte-identical output.
 */

import { Series } from "./data.js";

export interface PanelOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logY?: boolean;
  hline?: { value: number; label: string };
  width?: number;
  height?: number;
}

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const MARGIN = { left: 64, right: 16, top: 32, bottom: 44 };

function fmt(v: number): string {
  return Number.isInteger(v) && Math.abs(v) < 1e6 ? String(v) : v.toPrecision(3);
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(lo); e <= Math.floor(hi); e += 1) ticks.push(e);
  if (ticks.length === 0) ticks.push(lo, hi);
  return ticks;
}

export function renderPanel(opts: PanelOptions, x0 = 0, y0 = 0): string {
  const width = opts.width ?? 440;
  const height = opts.height ?? 360;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const allT = opts.series.flatMap((s) => s.t);
  let allV = opts.series.flatMap((s) => s.values).filter((v) => Number.isFinite(v));
  if (opts.logY) allV = allV.filter((v) => v > 0).map((v) => Math.log10(v));
  if (opts.hline && !opts.logY) allV = allV.concat(opts.hline.value);
  const tLo = Math.min(...allT);
  const tHi = Math.max(...allT);
  let vLo = Math.min(...allV);
  let vHi = Math.max(...allV);
  if (vHi === vLo) {
    vLo -= 1;
    vHi += 1;
  }
  const pad = 0.05 * (vHi - vLo);
  vLo -= pad;
  vHi += pad;

  const sx = (t: number) => x0 + MARGIN.left + ((t - tLo) / (tHi - tLo || 1)) * plotW;
  const sy = (v: number) => {
    const value = opts.logY ? Math.log10(v) : v;
    return y0 + MARGIN.top + (1 - (value - vLo) / (vHi - vLo)) * plotH;
  };

  const parts: string[] = [];
  parts.push(
    `<text x="${x0 + width / 2}" y="${y0 + 18}" text-anchor="middle" ` +
      `font-size="14" font-weight="bold">${opts.title}</text>`,
  );
  parts.push(
    `<rect x="${x0 + MARGIN.left}" y="${y0 + MARGIN.top}" width="${plotW}" ` +
      `height="${plotH}" fill="none" stroke="#333" stroke-width="1"/>`,
  );

  for (const t of niceTicks(tLo, tHi)) {
    const x = sx(t);
    parts.push(`<line x1="${x}" y1="${y0 + MARGIN.top + plotH}" x2="${x}" ` +
      `y2="${y0 + MARGIN.top + plotH + 4}" stroke="#333"/>`);
    parts.push(`<text x="${x}" y="${y0 + MARGIN.top + plotH + 16}" ` +
      `text-anchor="middle" font-size="10">${fmt(t)}</text>`);
  }
  const vTicks = opts.logY ? logTicks(vLo, vHi) : niceTicks(vLo, vHi);
  for (const v of vTicks) {
    const y = y0 + MARGIN.top + (1 - (v - vLo) / (vHi - vLo)) * plotH;
    parts.push(`<line x1="${x0 + MARGIN.left - 4}" y1="${y}" ` +
      `x2="${x0 + MARGIN.left}" y2="${y}" stroke="#333"/>`);
    const label = opts.logY ? `1e${fmt(v)}` : fmt(v);
    parts.push(`<text x="${x0 + MARGIN.left - 6}" y="${y + 3}" ` +
      `text-anchor="end" font-size="10">${label}</text>`);
  }
  parts.push(`<text x="${x0 + width / 2}" y="${y0 + height - 6}" ` +
    `text-anchor="middle" font-size="11">${opts.xLabel}</text>`);
  parts.push(`<text x="${x0 + 14}" y="${y0 + MARGIN.top + plotH / 2}" ` +
    `text-anchor="middle" font-size="11" transform="rotate(-90 ${x0 + 14} ` +
    `${y0 + MARGIN.top + plotH / 2})">${opts.yLabel}</text>`);

  if (opts.hline) {
    const y = sy(opts.hline.value);
    parts.push(`<line x1="${sx(tLo)}" y1="${y}" x2="${sx(tHi)}" y2="${y}" ` +
      `stroke="#666" stroke-dasharray="5,4"/>`);
    parts.push(`<text x="${sx(tHi) - 4}" y="${y - 4}" text-anchor="end" ` +
      `font-size="10" fill="#666">${opts.hline.label}</text>`);
  }

  opts.series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    const pts = s.t
      .map((t, k) => [t, s.values[k]] as const)
      .filter(([, v]) => Number.isFinite(v) && (!opts.logY || v > 0))
      .map(([t, v]) => `${sx(t).toFixed(2)},${sy(v).toFixed(2)}`)
      .join(" ");
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" ` +
      `stroke-width="1.5"/>`);
    const ly = y0 + MARGIN.top + 14 + 14 * i;
    const lx = x0 + MARGIN.left + plotW - 120;
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" ` +
      `stroke="${color}" stroke-width="1.5"/>`);
    parts.push(`<text x="${lx + 22}" y="${ly}" font-size="10">${s.label}</text>`);
  });
  return parts.join("\n");
}

export function svgDocument(body: string, width: number, height: number): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}" ` +
    `font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    `${body}\n</svg>\n`
  );
}

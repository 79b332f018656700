/**
 * Figure assembly: relative-energy panel (log E vs t, one curve per level),
 * convergence-order panel (EOC vs t per adjacent pair, guide line at 2),
 * energy/free-energy decay panel, and the combined two-panel figure.
 */

import { writeFileSync } from "fs";

import {
  Series,
  StudyData,
  energyDecaySeries,
  eocSeries,
  finestDiagnostics,
  loadStudy,
  relativeEnergySeries,
} from "./data.js";
import { PanelOptions, renderPanel, svgDocument } from "./svg.js";

export type Panel = "relative-energy" | "eoc" | "energy-decay" | "combined";

export interface FigureSpec {
  inputDir: string;
  outputPath: string;
  panel: Panel;
}

const PANEL_W = 460;
const PANEL_H = 380;

function relativePanel(data: StudyData): PanelOptions {
  return {
    title: "Relative energy vs reference",
    xLabel: "t",
    yLabel: "E_total",
    series: relativeEnergySeries(data.relative),
    logY: true,
  };
}

function eocPanel(data: StudyData): PanelOptions {
  return {
    title: "Convergence order",
    xLabel: "t",
    yLabel: "EOC",
    series: eocSeries(data.eoc),
    hline: { value: 2, label: "order 2" },
  };
}

function decayPanel(data: StudyData): PanelOptions {
  const { tag, rows } = finestDiagnostics(data);
  return {
    title: `Energy decay (${tag})`,
    xLabel: "t",
    yLabel: "value",
    series: energyDecaySeries(rows),
  };
}

/** The data series each panel would plot (pure; used by tests). */
export function extractSeries(data: StudyData, panel: Panel): Series[] {
  switch (panel) {
    case "relative-energy":
      return relativeEnergySeries(data.relative);
    case "eoc":
      return eocSeries(data.eoc);
    case "energy-decay":
      return energyDecaySeries(finestDiagnostics(data).rows);
    case "combined":
      return [
        ...relativeEnergySeries(data.relative),
        ...eocSeries(data.eoc),
      ];
  }
}

export function renderToString(data: StudyData, panel: Panel): string {
  if (panel === "combined") {
    const body = [
      renderPanel({ ...relativePanel(data), width: PANEL_W, height: PANEL_H }, 0, 0),
      renderPanel({ ...eocPanel(data), width: PANEL_W, height: PANEL_H }, PANEL_W, 0),
    ].join("\n");
    return svgDocument(body, 2 * PANEL_W, PANEL_H);
  }
  const opts =
    panel === "relative-energy" ? relativePanel(data)
    : panel === "eoc" ? eocPanel(data)
    : decayPanel(data);
  return svgDocument(
    renderPanel({ ...opts, width: PANEL_W, height: PANEL_H }), PANEL_W, PANEL_H);
}

export function render(spec: FigureSpec): void {
  const data = loadStudy(spec.inputDir);
  writeFileSync(spec.outputPath, renderToString(data, spec.panel));
}

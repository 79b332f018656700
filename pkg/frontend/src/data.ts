/**
 * Loading and series extraction from a study output directory.
 *
 * Extraction is a pure function of the parsed rows, so the plotted series
 * are bitwise-reproducible from identical inputs and can be compared
 * against the CSV contents directly in tests.
 */

import { readFileSync, readdirSync } from "fs";
import path from "path";

import {
  DIAGNOSTICS_COLUMNS,
  EOC_COLUMNS,
  RELATIVE_ENERGY_COLUMNS,
  Row,
  parseCsv,
} from "./schema.js";

export interface Series {
  label: string;
  t: number[];
  values: number[];
}

export interface StudyData {
  relative: Row[];
  eoc: Row[];
  /** diagnostics keyed by mesh level tag, e.g. "M8" */
  diagnostics: Map<string, Row[]>;
}

export function loadStudy(dir: string): StudyData {
  const read = (name: string, cols: readonly string[]) =>
    parseCsv(readFileSync(path.join(dir, name), "utf-8"), cols, name);
  const diagnostics = new Map<string, Row[]>();
  for (const entry of readdirSync(dir).sort()) {
    const match = /^diagnostics_(.+)\.csv$/.exec(entry);
    if (match) diagnostics.set(match[1], read(entry, DIAGNOSTICS_COLUMNS));
  }
  return {
    relative: read("relative_energy.csv", RELATIVE_ENERGY_COLUMNS),
    eoc: read("eoc.csv", EOC_COLUMNS),
    diagnostics,
  };
}

/** One relative-energy curve per mesh level, in increasing M order. */
export function relativeEnergySeries(rows: Row[]): Series[] {
  const levels = [...new Set(rows.map((r) => r.M))].sort((a, b) => a - b);
  return levels.map((m) => {
    const mine = rows.filter((r) => r.M === m);
    return {
      label: `M=${m}`,
      t: mine.map((r) => r.t),
      values: mine.map((r) => r.E_total),
    };
  });
}

/** One convergence-order curve per adjacent level pair. */
export function eocSeries(rows: Row[]): Series[] {
  const keyOf = (r: Row) => `${r.M_coarse}|${r.M_fine}`;
  const keys = [...new Set(rows.map(keyOf))].sort((a, b) => {
    const ca = Number(a.split("|")[0]);
    const cb = Number(b.split("|")[0]);
    return ca - cb;
  });
  return keys.map((key) => {
    const [coarse, fine] = key.split("|");
    const mine = rows.filter((r) => keyOf(r) === key);
    return {
      label: `M=${coarse} vs M=${fine}`,
      t: mine.map((r) => r.t),
      values: mine.map((r) => r.EOC),
    };
  });
}

/** Energy and free-energy decay curves of one diagnostics table. */
export function energyDecaySeries(rows: Row[]): Series[] {
  return [
    {
      label: "energy",
      t: rows.map((r) => r.t),
      values: rows.map((r) => r.kinetic + r.elastic_trace),
    },
    {
      label: "free energy",
      t: rows.map((r) => r.t),
      values: rows.map((r) => r.free_energy),
    },
  ];
}

/** Pick the diagnostics table of the finest level for the decay panel. */
export function finestDiagnostics(data: StudyData): { tag: string; rows: Row[] } {
  let best: { tag: string; rows: Row[] } | undefined;
  let bestM = -Infinity;
  for (const [tag, rows] of data.diagnostics) {
    const match = /M(\d+)$/.exec(tag);
    const m = match ? Number(match[1]) : 0;
    if (m > bestM) {
      bestM = m;
      best = { tag, rows };
    }
  }
  if (!best) throw new Error("no diagnostics_M*.csv found");
  return best;
}

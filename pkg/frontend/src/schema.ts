/**
 * Strict CSV ingestion for the solver's diagnostics outputs.
 *
 * The plotting side owns no solver knowledge: it trusts the documented
 * column contracts exactly, and any deviation (missing, renamed, reordered
 * or extra column) is a SchemaError naming the offending columns.
 */

export class SchemaError extends Error {
  constructor(
    public readonly file: string,
    public readonly missing: string[],
    public readonly unexpected: string[],
  ) {
    const parts: string[] = [];
    if (missing.length > 0) parts.push(`missing column(s): ${missing.join(", ")}`);
    if (unexpected.length > 0)
      parts.push(`unexpected column(s): ${unexpected.join(", ")}`);
    super(`${file}: ${parts.join("; ") || "header mismatch"}`);
    this.name = "SchemaError";
  }
}

export const RELATIVE_ENERGY_COLUMNS = [
  "t", "M", "E_kin", "E_el", "E_frob", "E_total",
] as const;

export const EOC_COLUMNS = ["t", "M_coarse", "M_fine", "EOC"] as const;

export const DIAGNOSTICS_COLUMNS = [
  "t", "kinetic", "elastic_trace", "frobenius", "log_term", "visc_diss",
  "trace_grad_diss", "relax_diss", "source", "free_energy", "min_eig",
  "div_norm", "fp_iters",
] as const;

export type Row = Record<string, number>;

/** Parse CSV text against an exact expected header. */
export function parseCsv(
  text: string,
  expected: readonly string[],
  file: string,
): Row[] {
  const lines = text.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length === 0) throw new SchemaError(file, [...expected], []);
  const header = lines[0].split(",").map((h) => h.trim());
  const missing = expected.filter((c) => !header.includes(c));
  const unexpected = header.filter((c) => !(expected as readonly string[]).includes(c));
  if (missing.length > 0 || unexpected.length > 0 || header.length !== expected.length) {
    throw new SchemaError(file, missing, unexpected);
  }
  const rows: Row[] = [];
  for (const line of lines.slice(1)) {
    if (line.startsWith("FAILED")) {
      throw new Error(`${file}: run marked FAILED (${line})`);
    }
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new Error(`${file}: row has ${cells.length} cells, expected ${header.length}`);
    }
    const row: Row = {};
    header.forEach((name, i) => {
      row[name] = Number(cells[i]);
    });
    rows.push(row);
  }
  return rows;
}

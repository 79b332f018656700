import { mkdtempSync, readFileSync, writeFileSync, copyFileSync, readdirSync } from "fs";
import { tmpdir } from "os";
import path from "path";
import { describe, expect, it } from "vitest";

import { eocSeries, loadStudy } from "../src/data.js";
import { extractSeries, render, renderToString } from "../src/render.js";
import { EOC_COLUMNS, SchemaError, parseCsv } from "../src/schema.js";
import { main } from "../src/cli.js";

const FIXTURES = path.join(__dirname, "fixtures", "study");

function tempDir(): string {
  return mkdtempSync(path.join(tmpdir(), "plots-"));
}

describe("schema validation", () => {
  it("accepts the documented eoc header", () => {
    const rows = parseCsv(
      readFileSync(path.join(FIXTURES, "eoc.csv"), "utf-8"),
      EOC_COLUMNS,
      "eoc.csv",
    );
    expect(rows.length).toBeGreaterThan(0);
    for (const key of EOC_COLUMNS) expect(rows[0]).toHaveProperty(key);
  });

  it("raises SchemaError naming a renamed column", () => {
    const text = readFileSync(path.join(FIXTURES, "eoc.csv"), "utf-8")
      .replace("M_coarse", "M_course");
    expect(() => parseCsv(text, EOC_COLUMNS, "eoc.csv")).toThrowError(SchemaError);
    try {
      parseCsv(text, EOC_COLUMNS, "eoc.csv");
    } catch (err) {
      const schema = err as SchemaError;
      expect(schema.missing).toEqual(["M_coarse"]);
      expect(schema.unexpected).toEqual(["M_course"]);
      expect(schema.message).toContain("M_coarse");
    }
  });

  it("raises SchemaError for a missing column", () => {
    const lines = readFileSync(path.join(FIXTURES, "eoc.csv"), "utf-8")
      .split("\n");
    const cut = [lines[0].split(",").slice(0, 3).join(",")]
      .concat(lines.slice(1).map((l) => l.split(",").slice(0, 3).join(",")));
    expect(() => parseCsv(cut.join("\n"), EOC_COLUMNS, "eoc.csv"))
      .toThrowError(/missing column\(s\): EOC/);
  });

  it("propagates a FAILED marker as an error", () => {
    const text = readFileSync(path.join(FIXTURES, "eoc.csv"), "utf-8")
      + "FAILED,solver blew up\n";
    expect(() => parseCsv(text, EOC_COLUMNS, "eoc.csv"))
      .toThrowError(/FAILED/);
  });
});

describe("series extraction", () => {
  it("right-panel series equal eoc.csv values exactly", () => {
    const data = loadStudy(FIXTURES);
    const series = eocSeries(data.eoc);
    const rows = parseCsv(
      readFileSync(path.join(FIXTURES, "eoc.csv"), "utf-8"),
      EOC_COLUMNS,
      "eoc.csv",
    );
    const flattened = series.flatMap((s) =>
      s.t.map((t, i) => ({ t, v: s.values[i], label: s.label })),
    );
    expect(flattened.length).toBe(rows.length);
    for (const row of rows) {
      const hit = flattened.find(
        (e) => e.t === row.t && e.label === `M=${row.M_coarse} vs M=${row.M_fine}`,
      );
      expect(hit).toBeDefined();
      expect(hit!.v).toBe(row.EOC); // exact, not approximate
    }
  });

  it("energy-decay free energy is non-increasing for the a > 0 fixture", () => {
    const data = loadStudy(FIXTURES);
    const rows = data.diagnostics.get("a1_M4")!;
    expect(rows).toBeDefined();
    const fe = rows.map((r) => r.free_energy);
    for (let i = 1; i < fe.length; i += 1) {
      expect(fe[i]).toBeLessThanOrEqual(fe[i - 1] + 1e-8);
    }
  });

  it("extraction is identical across repeated loads", () => {
    const a = extractSeries(loadStudy(FIXTURES), "combined");
    const b = extractSeries(loadStudy(FIXTURES), "combined");
    expect(a).toEqual(b);
  });
});

describe("rendering", () => {
  it("renders the combined figure from study CSVs without error", () => {
    const out = path.join(tempDir(), "combined.svg");
    render({ inputDir: FIXTURES, outputPath: out, panel: "combined" });
    const svg = readFileSync(out, "utf-8");
    expect(svg).toContain("<svg");
    expect(svg).toContain("Convergence order");
    expect(svg).toContain("Relative energy");
    expect(svg).toContain("order 2");
  });

  it("renders every single panel", () => {
    const data = loadStudy(FIXTURES);
    for (const panel of ["relative-energy", "eoc", "energy-decay"] as const) {
      const svg = renderToString(data, panel);
      expect(svg).toContain("<svg");
      expect(svg).toContain("polyline");
    }
  });

  it("is byte-deterministic", () => {
    const data = loadStudy(FIXTURES);
    expect(renderToString(data, "combined")).toBe(renderToString(data, "combined"));
  });

  it("cli renders and reports schema errors", () => {
    const out = path.join(tempDir(), "fig.svg");
    expect(main(["--in", FIXTURES, "--out", out, "--panel", "combined"])).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("<svg");

    const broken = tempDir();
    for (const entry of readdirSync(FIXTURES)) {
      copyFileSync(path.join(FIXTURES, entry), path.join(broken, entry));
    }
    const text = readFileSync(path.join(broken, "eoc.csv"), "utf-8");
    writeFileSync(path.join(broken, "eoc.csv"), text.replace("EOC", "rate"));
    expect(main(["--in", broken, "--out", out, "--panel", "eoc"])).toBe(3);
  });
});

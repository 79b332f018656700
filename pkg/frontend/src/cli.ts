#!/usr/bin/env node
/**
 * render --in <dir> --out <file.svg> --panel <relative-energy|eoc|energy-decay|combined>
 */

import { Panel, render } from "./render.js";
import { SchemaError } from "./schema.js";

const PANELS: Panel[] = ["relative-energy", "eoc", "energy-decay", "combined"];

function usage(): never {
  console.error(
    "usage: render --in <dir> --out <file.svg> " +
      `--panel <${PANELS.join("|")}>`,
  );
  process.exit(2);
}

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || argv[i + 1] === undefined) usage();
    args.set(argv[i].slice(2), argv[i + 1]);
  }
  const inputDir = args.get("in");
  const outputPath = args.get("out");
  const panel = (args.get("panel") ?? "combined") as Panel;
  if (!inputDir || !outputPath || !PANELS.includes(panel)) usage();
  try {
    render({ inputDir, outputPath, panel });
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 3;
    }
    console.error(String(err));
    return 1;
  }
  return 0;
}

if (process.argv[1] && /cli\.(js|ts)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}

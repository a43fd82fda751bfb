#!/usr/bin/env node
/** reportkit CLI: render plots and a markdown report from run artifacts.
 *
 * Usage:
 *   node dist/cli.js <run-dir> [<run-dir> ...] --out DIR
 */

import { SchemaError, renderReport } from "./report.js";

export function parseArgs(argv: string[]): { runDirs: string[]; outDir: string } {
  const runDirs: string[] = [];
  let outDir = "report";
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--out" && argv[i + 1]) {
      outDir = argv[++i];
    } else if (a === "--help" || a === "-h") {
      console.log("usage: report <run-dir>... --out DIR");
      process.exit(0);
    } else {
      runDirs.push(a);
    }
  }
  if (runDirs.length === 0) {
    console.error("error: at least one run directory is required");
    process.exit(2);
  }
  return { runDirs, outDir };
}

function main(): void {
  const { runDirs, outDir } = parseArgs(process.argv.slice(2));
  try {
    const written = renderReport(runDirs, outDir);
    console.log(`wrote ${written.length} files to ${outDir}`);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      process.exit(3);
    }
    throw err;
  }
}

main();

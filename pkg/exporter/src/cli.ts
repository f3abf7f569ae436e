#!/usr/bin/env node
import { parseArgs } from "node:util";
import { exportRepo } from "./export.js";

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        repo: { type: "string" },
        out: { type: "string" },
        filter: { type: "string", default: "PKGBUILD" },
      },
    }));
  } catch (error) {
    console.error((error as Error).message);
    return 2;
  }
  if (!values.repo || !values.out) {
    console.error("usage: capivara-export --repo <path> --out <events file> [--filter PKGBUILD]");
    return 2;
  }
  try {
    const result = exportRepo(values.repo, values.out, values.filter);
    if (result.warnings > 0) {
      console.error(`warning: skipped ${result.warnings} unreadable blobs`);
    }
    console.log(`${result.records.length} records`);
    return 0;
  } catch (error) {
    console.error((error as Error).message);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}

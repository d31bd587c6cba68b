#!/usr/bin/env node
/**
 * Render one figure from an orbitcont run directory.
 *
 *   orbitcont-plot --run out/ --kind manifold --out manifold.svg
 *   orbitcont-plot --run out/ --kind manifold --axes 0,1,2 --overlay out/overlay.json --out m.svg
 *   orbitcont-plot --run out/ --kind diagram|convergence|scaling --out fig.svg
 */

import { writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { readMesh, readOverlay, readTable } from "./readers.js";
import { plotConvergence, plotDiagram, plotManifold, plotScaling } from "./plots.js";

export function renderFigure(
  runDir: string,
  kind: string,
  axes: [number, number, number],
  overlayPath?: string,
): string {
  switch (kind) {
    case "manifold": {
      const mesh = readMesh(join(runDir, "mesh.json"));
      const overlay = overlayPath ? readOverlay(overlayPath) : undefined;
      return plotManifold(mesh, axes, overlay);
    }
    case "diagram":
      return plotDiagram(readTable(join(runDir, "diagram.csv")));
    case "convergence":
      return plotConvergence(readTable(join(runDir, "convergence.csv")));
    case "scaling":
      return plotScaling(readTable(join(runDir, "timing.csv")));
    default:
      throw new Error(`unknown figure kind '${kind}' (manifold|diagram|convergence|scaling)`);
  }
}

function main(): void {
  const { values } = parseArgs({
    options: {
      run: { type: "string" },
      kind: { type: "string" },
      out: { type: "string" },
      axes: { type: "string", default: "0,1,2" },
      overlay: { type: "string" },
    },
  });
  if (!values.run || !values.kind || !values.out) {
    console.error("usage: orbitcont-plot --run DIR --kind KIND --out FILE [--axes i,j,k] [--overlay FILE]");
    process.exit(2);
  }
  const axes = values.axes!.split(",").map(Number);
  if (axes.length !== 3 || axes.some((a) => !Number.isInteger(a) || a < 0)) {
    console.error(`bad --axes '${values.axes}': need three non-negative integers`);
    process.exit(2);
  }
  const svg = renderFigure(
    values.run,
    values.kind,
    axes as [number, number, number],
    values.overlay,
  );
  writeFileSync(values.out, svg);
}

if (process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!)) {
  main();
}

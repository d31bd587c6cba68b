import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { plotConvergence, plotDiagram, plotManifold, plotScaling } from "../src/plots.js";
import { Mesh, readMesh, readTable } from "../src/readers.js";

const DEMO = fileURLToPath(new URL("./fixtures/demo", import.meta.url));

function count(svg: string, needle: string): number {
  return svg.split(needle).length - 1;
}

describe("plotManifold", () => {
  it("draws one orbit curve per mesh orbit plus surface ribbons", () => {
    const mesh = readMesh(join(DEMO, "mesh.json"));
    const svg = plotManifold(mesh);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(count(svg, 'class="orbit"')).toBe(mesh.orbits.length);
    expect(count(svg, 'class="ribbon"')).toBe(
      (mesh.orbits.length - 1) * (mesh.orbits[0].samples.length - 1),
    );
  });

  it("is deterministic", () => {
    const mesh = readMesh(join(DEMO, "mesh.json"));
    expect(plotManifold(mesh)).toBe(plotManifold(mesh));
  });

  it("renders an empty mesh as an empty-axes image", () => {
    const empty: Mesh = { version: "0", configHash: "0", metadata: {}, orbits: [] };
    const svg = plotManifold(empty);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(count(svg, 'class="orbit"')).toBe(0);
    expect(svg).toContain("empty mesh");
  });

  it("respects the axes selection", () => {
    const mesh = readMesh(join(DEMO, "mesh.json"));
    const a = plotManifold(mesh, [0, 1, 2]);
    const b = plotManifold(mesh, [2, 1, 0]);
    expect(a).not.toBe(b);
    expect(b).toContain("axes (2, 1, 0)");
  });
});

describe("plotDiagram", () => {
  it("marks fold points distinctly", () => {
    const diagram = readTable(join(DEMO, "diagram.csv"));
    const svg = plotDiagram(diagram);
    const folds = diagram.rows.filter((r) => r.fold !== 0).length;
    expect(count(svg, 'class="fold"')).toBe(folds);
    expect(count(svg, 'class="point"')).toBe(diagram.rows.length - folds);
    expect(count(svg, 'class="diagram"')).toBe(1);
  });

  it("renders an empty table without throwing", () => {
    const diagram = readTable(join(DEMO, "diagram.csv"));
    const svg = plotDiagram({ ...diagram, rows: [] });
    expect(svg.startsWith("<svg")).toBe(true);
  });
});

describe("plotConvergence", () => {
  it("shows residual curves and the dotted quadratic reference", () => {
    const convergence = readTable(join(DEMO, "convergence.csv"));
    const svg = plotConvergence(convergence);
    expect(count(svg, 'class="reference"')).toBe(1);
    expect(svg).toContain("stroke-dasharray");
    expect(count(svg, 'class="gmres"')).toBeGreaterThan(0);
  });

  it("plots data whose residuals decrease within every step", () => {
    // the underlying solver invariant; the figure would expose a violation
    const convergence = readTable(join(DEMO, "convergence.csv"));
    const byStep = new Map<number, number[]>();
    for (const row of convergence.rows) {
      const list = byStep.get(row.step) ?? [];
      list.push(row.residual);
      byStep.set(row.step, list);
    }
    for (const residuals of byStep.values()) {
      for (let i = 1; i < residuals.length; i++) {
        expect(residuals[i]).toBeLessThan(residuals[i - 1]);
      }
    }
  });
});

describe("plotScaling", () => {
  it("draws the measurement and the dashed linear reference", () => {
    const timing = readTable(join(DEMO, "timing.csv"));
    const svg = plotScaling(timing);
    expect(count(svg, 'class="scaling"')).toBe(1);
    expect(count(svg, 'class="reference"')).toBe(1);
    expect(svg).toContain('stroke-dasharray="6 4"');
  });

  it("is deterministic", () => {
    const timing = readTable(join(DEMO, "timing.csv"));
    expect(plotScaling(timing)).toBe(plotScaling(timing));
  });
});

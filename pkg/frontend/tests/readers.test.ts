import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { SchemaError, readMesh, readOverlay, readTable, requireColumns } from "../src/readers.js";

const DEMO = fileURLToPath(new URL("./fixtures/demo", import.meta.url));

describe("readTable", () => {
  it("parses the diagram table with its provenance comment", () => {
    const table = readTable(join(DEMO, "diagram.csv"));
    expect(table.comment).toMatch(/^# orbitcont \S+ config=[0-9a-f]{12}$/);
    expect(table.columns).toContain("par");
    expect(table.columns).toContain("total_time");
    expect(table.rows.length).toBeGreaterThan(3);
    for (const row of table.rows) {
      expect(typeof row.par).toBe("number");
      expect(Number.isFinite(row.par)).toBe(true);
    }
  });

  it("keeps step numbering consistent between diagram and convergence", () => {
    const diagram = readTable(join(DEMO, "diagram.csv"));
    const convergence = readTable(join(DEMO, "convergence.csv"));
    const steps = new Set(convergence.rows.map((r) => r.step));
    for (const row of diagram.rows) {
      expect(steps.has(row.step)).toBe(true);
    }
  });

  it("rejects files without a comment line", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const path = join(dir, "bad.csv");
    writeFileSync(path, "a,b\n1,2\n");
    expect(() => readTable(path)).toThrow(SchemaError);
  });

  it("rejects non-numeric cells", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const path = join(dir, "bad.csv");
    writeFileSync(path, "# orbitcont 0.0 config=x\na,b\n1,oops\n");
    expect(() => readTable(path)).toThrow(/non-numeric/);
  });

  it("reports missing columns by name", () => {
    const table = readTable(join(DEMO, "timing.csv"));
    expect(() => requireColumns(table, ["no_such_column"], "timing")).toThrow(
      /no_such_column/,
    );
  });
});

describe("readMesh", () => {
  it("reads orbits with consistent shapes", () => {
    const mesh = readMesh(join(DEMO, "mesh.json"));
    expect(mesh.orbits.length).toBeGreaterThan(3);
    for (const orbit of mesh.orbits) {
      expect(orbit.samples.length).toBe(64);
      expect(orbit.start.length).toBe(3);
      expect(orbit.totalArclength).toBeGreaterThan(0);
    }
    // orbits are ordered by the continuation parameter
    const pars = mesh.orbits.map((o) => o.par);
    expect([...pars].sort((a, b) => a - b)).toEqual(pars);
  });

  it("shares the config hash with the CSV artifacts", () => {
    const mesh = readMesh(join(DEMO, "mesh.json"));
    const diagram = readTable(join(DEMO, "diagram.csv"));
    expect(diagram.comment).toContain(mesh.configHash);
  });

  it("rejects a JSON file with the wrong artifact tag", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const path = join(dir, "other.json");
    writeFileSync(path, JSON.stringify({ artifact: "something-else" }));
    expect(() => readMesh(path)).toThrow(SchemaError);
  });
});

describe("readOverlay", () => {
  it("reads one re-integrated curve per mesh orbit", () => {
    const mesh = readMesh(join(DEMO, "mesh.json"));
    const overlay = readOverlay(join(DEMO, "overlay.json"));
    expect(overlay.curves.length).toBe(mesh.orbits.length);
    expect(overlay.configHash).toBe(mesh.configHash);
    for (let i = 0; i < overlay.curves.length; i++) {
      expect(overlay.curves[i].par).toBeCloseTo(mesh.orbits[i].par, 12);
      expect(overlay.curves[i].points[0].length).toBe(3);
    }
  });
});

import { readFileSync } from "node:fs";

/** One numeric table read from an orbitcont CSV artifact. */
export interface Table {
  comment: string;
  columns: string[];
  rows: Record<string, number>[];
}

export interface MeshOrbit {
  par: number;
  start: number[];
  totalTime: number;
  totalArclength: number;
  samples: number[][];
}

export interface Mesh {
  version: string;
  configHash: string;
  metadata: Record<string, unknown>;
  orbits: MeshOrbit[];
}

export interface OverlayCurve {
  par: number;
  points: number[][];
}

export interface Overlay {
  configHash: string;
  curves: OverlayCurve[];
}

export class SchemaError extends Error {}

/**
 * Read an orbitcont CSV table.  The first line is a provenance comment
 * (`# orbitcont <version> config=<hash>`); the second is the header.
 * All cells are numeric.
 */
export function readTable(path: string): Table {
  const lines = readFileSync(path, "utf8")
    .split("\n")
    .map((l) => (l.endsWith("\r") ? l.slice(0, -1) : l))
    .filter((l) => l.length > 0);
  if (lines.length < 2 || !lines[0].startsWith("#")) {
    throw new SchemaError(`${path}: expected a provenance comment line`);
  }
  const comment = lines[0];
  const columns = lines[1].split(",");
  const rows: Record<string, number>[] = [];
  for (let i = 2; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(`${path}:${i + 1}: expected ${columns.length} cells`);
    }
    const row: Record<string, number> = {};
    for (let j = 0; j < columns.length; j++) {
      const v = Number(cells[j]);
      if (Number.isNaN(v)) {
        throw new SchemaError(`${path}:${i + 1}: non-numeric cell '${cells[j]}'`);
      }
      row[columns[j]] = v;
    }
    rows.push(row);
  }
  return { comment, columns, rows };
}

export function requireColumns(table: Table, names: string[], path = "table"): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`${path}: missing column '${name}'`);
    }
  }
}

function loadJson(path: string, artifact: string): any {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  if (doc.artifact !== artifact) {
    throw new SchemaError(`${path}: expected artifact '${artifact}', got '${doc.artifact}'`);
  }
  return doc;
}

/** Read a manifold mesh artifact (mesh.json from `orbitcont continue`). */
export function readMesh(path: string): Mesh {
  const doc = loadJson(path, "orbitcont-mesh");
  const orbits: MeshOrbit[] = doc.orbits.map((o: any) => ({
    par: o.par,
    start: o.start,
    totalTime: o.total_time,
    totalArclength: o.total_arclength,
    samples: o.samples,
  }));
  for (const orbit of orbits) {
    for (const p of orbit.samples) {
      if (p.length !== orbit.start.length) {
        throw new SchemaError(`${path}: inconsistent sample dimension`);
      }
    }
  }
  return {
    version: doc.version,
    configHash: doc.config_hash,
    metadata: doc.metadata ?? {},
    orbits,
  };
}

/** Read an overlay artifact: independently re-integrated orbit curves. */
export function readOverlay(path: string): Overlay {
  const doc = loadJson(path, "orbitcont-overlay");
  return {
    configHash: doc.config_hash,
    curves: doc.curves.map((c: any) => ({ par: c.par, points: c.points })),
  };
}

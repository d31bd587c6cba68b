import { createHash } from "node:crypto";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { plotManifold, project3 } from "../src/plots.js";
import { readMesh, readOverlay } from "../src/readers.js";
import { linearScale } from "../src/svg.js";

const DEMO = fileURLToPath(new URL("./fixtures/demo", import.meta.url));

// Frozen digest of the manifold+overlay figure from the demo run.  The SVG
// emitter rounds all coordinates, so any change in projection, layout, or
// input data shows up here.
const FROZEN_SHA256 =
  "f7db136fc6fcd7d48c544166243804db1f83701468c464e89f2eae15772c1987";

function pointToSegment(
  p: [number, number],
  a: [number, number],
  b: [number, number],
): number {
  const dx = b[0] - a[0];
  const dy = b[1] - a[1];
  const len2 = dx * dx + dy * dy;
  let t = len2 === 0 ? 0 : ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2;
  t = Math.max(0, Math.min(1, t));
  const qx = a[0] + t * dx;
  const qy = a[1] + t * dy;
  return Math.hypot(p[0] - qx, p[1] - qy);
}

function pointToPolyline(p: [number, number], poly: [number, number][]): number {
  let best = Infinity;
  for (let i = 0; i + 1 < poly.length; i++) {
    best = Math.min(best, pointToSegment(p, poly[i], poly[i + 1]));
  }
  return best;
}

describe("manifold overlay", () => {
  const mesh = readMesh(join(DEMO, "mesh.json"));
  const overlay = readOverlay(join(DEMO, "overlay.json"));

  it("re-integrated curves coincide with the mesh orbits on screen", () => {
    // shared screen mapping, mirroring the plot's internal scaling
    const axes: [number, number, number] = [0, 1, 2];
    const all = mesh.orbits.flatMap((o) => o.samples.map((p) => project3(p, axes)));
    const us = all.map((q) => q[0]);
    const vs = all.map((q) => q[1]);
    const xs = linearScale([Math.min(...us), Math.max(...us)], [0, 560]);
    const ys = linearScale([Math.min(...vs), Math.max(...vs)], [400, 0]);
    const toPix = (p: number[]): [number, number] => {
      const [u, v] = project3(p, axes);
      return [xs(u), ys(v)];
    };
    for (let i = 0; i < mesh.orbits.length; i++) {
      const orbitPix = mesh.orbits[i].samples.map(toPix);
      for (const point of overlay.curves[i].points) {
        // sub-pixel agreement between the stored mesh and the
        // independently re-integrated trajectory
        expect(pointToPolyline(toPix(point), orbitPix)).toBeLessThan(1.0);
      }
    }
  });

  it("figure bytes match the frozen visual-regression digest", () => {
    const svg = plotManifold(mesh, [0, 1, 2], overlay);
    expect(count(svg)).toBe(overlay.curves.length);
    const digest = createHash("sha256").update(svg).digest("hex");
    expect(digest).toBe(FROZEN_SHA256);
  });
});

function count(svg: string): number {
  return svg.split('class="overlay"').length - 1;
}

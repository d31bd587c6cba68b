import {
  Mesh,
  Overlay,
  Table,
  requireColumns,
} from "./readers.js";
import {
  SvgDoc,
  decadeTicks,
  linearScale,
  linearTicks,
  logScale,
} from "./svg.js";

const WIDTH = 640;
const HEIGHT = 480;
const MARGIN = { left: 62, right: 20, top: 24, bottom: 52 };

function plotArea(doc: SvgDoc) {
  return {
    x0: MARGIN.left,
    x1: doc.width - MARGIN.right,
    y0: doc.height - MARGIN.bottom, // bottom edge in pixels
    y1: MARGIN.top,
  };
}

// ---------------------------------------------------------------------------
// manifold surface

/** Fixed orthographic camera: azimuth -60 deg, elevation 30 deg. */
export function project3(p: number[], axes: [number, number, number]): [number, number] {
  const x = p[axes[0]];
  const y = p[axes[1]];
  const z = p[axes[2]];
  const ca = Math.cos(-Math.PI / 3);
  const sa = Math.sin(-Math.PI / 3);
  const ce = Math.cos(Math.PI / 6);
  const se = Math.sin(Math.PI / 6);
  const u = -x * sa + y * ca;
  const v = -(x * ca + y * sa) * se + z * ce;
  return [u, v];
}

/**
 * Render the manifold mesh as a shaded surface: ribbons between
 * consecutive orbits, the orbit curves on top, and (optionally) the
 * independently re-integrated overlay curves dashed on top of those.
 */
export function plotManifold(
  mesh: Mesh,
  axes: [number, number, number] = [0, 1, 2],
  overlay?: Overlay,
): string {
  const doc = new SvgDoc(WIDTH, HEIGHT);
  const area = plotArea(doc);
  doc.add(
    `<rect x="${area.x0}" y="${area.y1}" width="${area.x1 - area.x0}" height="${
      area.y0 - area.y1
    }" fill="none" stroke="#000"/>`,
  );
  doc.text(area.x0, 16, `manifold mesh, axes (${axes.join(", ")})`);
  if (mesh.orbits.length === 0) {
    doc.text((area.x0 + area.x1) / 2, (area.y0 + area.y1) / 2, "empty mesh", 'text-anchor="middle"');
    return doc.render();
  }

  const projected = mesh.orbits.map((o) => o.samples.map((p) => project3(p, axes)));
  const overlayProjected = (overlay?.curves ?? []).map((c) =>
    c.points.map((p) => project3(p, axes)),
  );
  let uMin = Infinity;
  let uMax = -Infinity;
  let vMin = Infinity;
  let vMax = -Infinity;
  for (const curve of [...projected, ...overlayProjected]) {
    for (const [u, v] of curve) {
      uMin = Math.min(uMin, u);
      uMax = Math.max(uMax, u);
      vMin = Math.min(vMin, v);
      vMax = Math.max(vMax, v);
    }
  }
  const pad = 0.05 * Math.max(uMax - uMin, vMax - vMin, 1e-12);
  const xs = linearScale([uMin - pad, uMax + pad], [area.x0, area.x1]);
  const ys = linearScale([vMin - pad, vMax + pad], [area.y0, area.y1]);
  const toPix = ([u, v]: [number, number]): [number, number] => [xs(u), ys(v)];

  // surface ribbons between neighbouring orbits (equal sample counts)
  for (let i = 0; i + 1 < projected.length; i++) {
    const a = projected[i];
    const b = projected[i + 1];
    const m = Math.min(a.length, b.length);
    for (let j = 0; j + 1 < m; j++) {
      doc.polygon(
        [toPix(a[j]), toPix(a[j + 1]), toPix(b[j + 1]), toPix(b[j])],
        'class="ribbon" fill="#9ecae1" fill-opacity="0.35" stroke="none"',
      );
    }
  }
  for (const curve of projected) {
    doc.polyline(curve.map(toPix), 'class="orbit" stroke="#1f77b4" stroke-width="1.2"');
  }
  for (const curve of overlayProjected) {
    doc.polyline(
      curve.map(toPix),
      'class="overlay" stroke="#d62728" stroke-width="1" stroke-dasharray="4 3"',
    );
  }
  return doc.render();
}

// ---------------------------------------------------------------------------
// continuation diagram

/** Start offset (log scale parameter) against accumulated orbit time. */
export function plotDiagram(diagram: Table): string {
  requireColumns(diagram, ["par", "total_time", "fold"], "diagram");
  const doc = new SvgDoc(WIDTH, HEIGHT);
  const area = plotArea(doc);
  const rows = diagram.rows;
  const pars = rows.map((r) => r.par);
  const times = rows.map((r) => r.total_time);
  const xs = linearScale(
    rows.length > 0 ? [Math.min(...pars), Math.max(...pars)] : [0, 1],
    [area.x0, area.x1],
  );
  const ys = linearScale(
    rows.length > 0 ? [0, Math.max(...times)] : [0, 1],
    [area.y0, area.y1],
  );
  doc.axes(
    xs,
    ys,
    linearTicks(xs.domain[0], xs.domain[1]),
    linearTicks(ys.domain[0], ys.domain[1]),
    "start offset (log)",
    "orbit time",
  );
  if (rows.length > 0) {
    doc.polyline(
      rows.map((r) => [xs(r.par), ys(r.total_time)]),
      'class="diagram" stroke="#1f77b4" stroke-width="1.5"',
    );
    for (const r of rows) {
      if (r.fold !== 0) {
        doc.circle(xs(r.par), ys(r.total_time), 5, 'class="fold" fill="none" stroke="#d62728" stroke-width="1.5"');
      } else {
        doc.circle(xs(r.par), ys(r.total_time), 2.5, 'class="point" fill="#1f77b4"');
      }
    }
  }
  return doc.render();
}

// ---------------------------------------------------------------------------
// convergence

/**
 * Newton residual history per continuation step (log scale) with a dotted
 * quadratic-convergence reference, plus the Krylov iteration count of
 * every inner solve as a bar strip underneath.
 */
export function plotConvergence(convergence: Table): string {
  requireColumns(convergence, ["step", "newton_iteration", "residual", "gmres_iterations"], "convergence");
  const doc = new SvgDoc(WIDTH, HEIGHT);
  const split = 330; // bottom pixel of the residual panel
  const area = plotArea(doc);

  const bySteps = new Map<number, { it: number; r: number; g: number }[]>();
  for (const row of convergence.rows) {
    const list = bySteps.get(row.step) ?? [];
    list.push({ it: row.newton_iteration, r: row.residual, g: row.gmres_iterations });
    bySteps.set(row.step, list);
  }
  const steps = [...bySteps.keys()].sort((a, b) => a - b);

  const residuals = convergence.rows.map((r) => r.residual).filter((r) => r > 0);
  const rMax = residuals.length > 0 ? Math.max(...residuals) : 1;
  const rMin = residuals.length > 0 ? Math.min(...residuals) : 1e-12;
  const itMax = Math.max(1, ...convergence.rows.map((r) => r.newton_iteration));
  const xs = linearScale([0, itMax], [area.x0, area.x1]);
  const ys = logScale([rMin, rMax], [split, area.y1]);
  doc.axes(
    xs,
    ys,
    linearTicks(0, itMax, Math.min(itMax, 6)),
    decadeTicks(rMin, rMax),
    "",
    "residual",
  );
  for (const step of steps) {
    const pts = bySteps
      .get(step)!
      .filter((p) => p.r > 0)
      .map((p): [number, number] => [xs(p.it), ys(p.r)]);
    if (pts.length > 1) {
      doc.polyline(pts, 'class="newton" stroke="#1f77b4" stroke-width="1"');
    }
    for (const [px, py] of pts) {
      doc.circle(px, py, 2, 'fill="#1f77b4"');
    }
  }
  // quadratic reference r_{j+1} = r_j^2 anchored at the largest residual
  const ref: [number, number][] = [];
  let r = rMax;
  for (let j = 0; j <= itMax && r >= rMin; j++) {
    ref.push([xs(j), ys(r)]);
    r = r * r;
  }
  if (ref.length > 1) {
    doc.polyline(ref, 'class="reference" stroke="#555" stroke-width="1" stroke-dasharray="2 3"');
  }
  doc.text(area.x1 - 4, area.y1 + 12, "quadratic reference", 'text-anchor="end" fill="#555"');

  // Krylov iteration strip: one bar per inner solve, in run order
  const solves = convergence.rows.filter((row) => row.gmres_iterations > 0);
  const gTop = split + 34;
  const gBottom = area.y0;
  const gMax = Math.max(1, ...solves.map((row) => row.gmres_iterations));
  doc.text(area.x0, split + 28, "Krylov iterations per solve");
  if (solves.length > 0) {
    const bw = (area.x1 - area.x0) / solves.length;
    for (let i = 0; i < solves.length; i++) {
      const h = ((gBottom - gTop) * solves[i].gmres_iterations) / gMax;
      doc.add(
        `<rect class="gmres" x="${(area.x0 + i * bw).toFixed(2)}" y="${(gBottom - h).toFixed(
          2,
        )}" width="${Math.max(bw - 1, 0.5).toFixed(2)}" height="${h.toFixed(2)}" fill="#9ecae1"/>`,
      );
    }
    doc.text(area.x0 - 8, gTop + 4, String(gMax), 'text-anchor="end"');
  }
  return doc.render();
}

// ---------------------------------------------------------------------------
// parallel scaling

/** Mean wall time per step against worker count, with the ideal
 * linear-scaling curve t(1)/W dashed for comparison. */
export function plotScaling(timing: Table): string {
  requireColumns(timing, ["wall_time", "workers"], "timing");
  const doc = new SvgDoc(WIDTH, HEIGHT);
  const area = plotArea(doc);

  const byWorkers = new Map<number, number[]>();
  for (const row of timing.rows) {
    const list = byWorkers.get(row.workers) ?? [];
    list.push(row.wall_time);
    byWorkers.set(row.workers, list);
  }
  const workers = [...byWorkers.keys()].sort((a, b) => a - b);
  const means = workers.map((w) => {
    const list = byWorkers.get(w)!;
    return list.reduce((a, b) => a + b, 0) / list.length;
  });

  const wMax = workers.length > 0 ? Math.max(...workers, 2) : 2;
  const tMax = means.length > 0 ? Math.max(...means) : 1;
  const xs = linearScale([0, wMax], [area.x0, area.x1]);
  const ys = linearScale([0, tMax * 1.1], [area.y0, area.y1]);
  doc.axes(
    xs,
    ys,
    linearTicks(0, wMax, Math.min(wMax, 6)),
    linearTicks(0, tMax * 1.1),
    "workers",
    "wall time per step [s]",
  );
  if (workers.length > 0) {
    // dashed ideal: serial time divided by the worker count
    const t1 = means[0] * workers[0];
    const ref: [number, number][] = [];
    for (let w = workers[0]; w <= wMax; w++) {
      ref.push([xs(w), ys(t1 / w)]);
    }
    doc.polyline(ref, 'class="reference" stroke="#555" stroke-width="1" stroke-dasharray="6 4"');
    doc.polyline(
      workers.map((w, i) => [xs(w), ys(means[i])]),
      'class="scaling" stroke="#1f77b4" stroke-width="1.5"',
    );
    for (let i = 0; i < workers.length; i++) {
      doc.circle(xs(workers[i]), ys(means[i]), 3, 'class="point" fill="#1f77b4"');
    }
    doc.text(area.x1 - 4, area.y1 + 12, "linear scaling", 'text-anchor="end" fill="#555"');
  }
  return doc.render();
}

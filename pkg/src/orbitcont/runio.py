"""Run configuration, result artifacts and checkpointing.

A run is configured by a YAML file (strictly validated, unknown keys
rejected) and produces a directory of artifacts: the manifold mesh
(JSON), continuation diagram / Newton convergence / timing tables (CSV)
and a restart checkpoint (JSON).  Every artifact carries the package
version and a hash of the originating configuration so runs can be
matched to their inputs.
"""

import csv
import hashlib
import io
import json
import os

import numpy as np
import yaml

from . import __version__
from .bvp import BoundaryCondition, LeftBoundary, ShootingProblem, Unknowns
from .continuation import ContinuationConfig, ManifoldMesh
from .errors import ConfigError
from .integrate import IntegratorConfig
from .models import linear_saddle, linear_saddle_orbit, lorenz, shear_model_plugin
from .stability import PeriodicOrbit

# configuration schema: section -> allowed keys (None: free-form mapping)
_SCHEMA = {
    "model": {"name", "params", "plugin_path"},
    "integrator": {"rel_tol", "abs_tol", "max_step", "event_tol", "max_nodes"},
    "orbit": {"guess_point", "guess_period", "po_tol"},
    "boundary": {"mode", "u1_sign", "eps0", "equilibrium"},
    "conditions": None,  # list, validated separately
    "continuation": {
        "ds0", "ds_min", "ds_max", "newton_tol", "newton_max", "gmres_tol",
        "gmres_extra", "max_steps", "par_span", "max_total_time",
        "amplification_threshold", "max_intervals", "samples_per_orbit", "seed",
    },
    "workers": None,
}
_EQ_KEYS = {"point", "unstable_vectors", "radius", "rates", "time_scale", "theta0"}
_COND_KEYS = {
    "fixed_time": {"kind", "T"},
    "poincare": {"kind", "normal", "offset"},
    "arclength": {"kind", "target"},
}


def load_config(path):
    """Load and validate a run configuration; returns a plain dict."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    validate_config(raw, origin=str(path))
    return raw


def validate_config(cfg, origin="config"):
    for key, val in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"{origin}: unknown top-level key {key!r}")
    for section, allowed in _SCHEMA.items():
        if section not in cfg or allowed is None:
            continue
        block = cfg[section]
        if not isinstance(block, dict):
            raise ConfigError(f"{origin}: section {section!r} must be a mapping")
        for key in block:
            if key not in allowed:
                raise ConfigError(f"{origin}: unknown key {key!r} in section {section!r}")
    eq = cfg.get("boundary", {}).get("equilibrium")
    if eq is not None:
        for key in eq:
            if key not in _EQ_KEYS:
                raise ConfigError(f"{origin}: unknown key {key!r} in boundary.equilibrium")
    conds = cfg.get("conditions", [])
    if not isinstance(conds, list):
        raise ConfigError(f"{origin}: 'conditions' must be a list")
    for i, c in enumerate(conds):
        if not isinstance(c, dict) or "kind" not in c:
            raise ConfigError(f"{origin}: conditions[{i}] needs a 'kind'")
        kind = c["kind"]
        if kind not in _COND_KEYS:
            raise ConfigError(f"{origin}: conditions[{i}] has unknown kind {kind!r}")
        for key in c:
            if key not in _COND_KEYS[kind]:
                raise ConfigError(
                    f"{origin}: unknown key {key!r} in conditions[{i}] ({kind})"
                )


def config_hash(cfg):
    """Stable short hash of a configuration dict."""
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)


# ---------------------------------------------------------------------------
# construction from configuration

MODEL_NAMES = ("lorenz", "linear_saddle", "plugin")


def build_field(cfg):
    m = cfg.get("model")
    if not m or "name" not in m:
        raise ConfigError("config needs model.name")
    name = m["name"]
    params = m.get("params", {}) or {}
    if name == "lorenz":
        return lorenz(**params)
    if name == "linear_saddle":
        return linear_saddle(**params)
    if name == "plugin":
        if "plugin_path" not in m:
            raise ConfigError("model.name 'plugin' needs model.plugin_path")
        return shear_model_plugin(m["plugin_path"])
    raise ConfigError(
        f"unknown model name {name!r}; available: {', '.join(MODEL_NAMES)}")


def build_integrator_config(cfg):
    return IntegratorConfig(**(cfg.get("integrator") or {}))


def build_continuation_config(cfg):
    return ContinuationConfig(**(cfg.get("continuation") or {}))


def build_conditions(cfg):
    out = []
    for c in cfg.get("conditions", []):
        if c["kind"] == "fixed_time":
            out.append(BoundaryCondition.fixed_time(c["T"]))
        elif c["kind"] == "poincare":
            out.append(BoundaryCondition.poincare(c["normal"], c["offset"]))
        else:
            out.append(BoundaryCondition.arclength(c["target"]))
    if not out:
        raise ConfigError("config needs at least one entry in 'conditions'")
    return out


_MODES = ("unstable-po", "stable-po", "unstable-eq", "stable-eq")


def build_left_boundary(cfg, po: PeriodicOrbit = None):
    b = cfg.get("boundary") or {}
    mode = b.get("mode", "unstable-po")
    if mode not in _MODES:
        raise ConfigError(f"boundary.mode must be one of {_MODES}, got {mode!r}")
    reverse = mode.startswith("stable")
    if mode.endswith("-po"):
        if po is None:
            raise ConfigError("periodic-orbit boundary needs refined orbit data")
        return LeftBoundary.periodic_orbit(po, u1_sign=int(b.get("u1_sign", 1)),
                                           reverse_time=reverse)
    eq = b.get("equilibrium")
    if not eq:
        raise ConfigError("equilibrium boundary needs boundary.equilibrium")
    return LeftBoundary.equilibrium(
        eq["point"], np.array(eq["unstable_vectors"], dtype=float).T,
        eq["radius"], time_scale=eq.get("time_scale"),
        rates=eq.get("rates"), reverse_time=reverse)


# ---------------------------------------------------------------------------
# artifact writing

def _header(cfg_hash):
    return f"# orbitcont {__version__} config={cfg_hash}"


def write_csv(path, rows, fieldnames, cfg_hash):
    """CSV with a one-line provenance comment before the header row."""
    with open(path, "w", newline="") as fh:
        fh.write(_header(cfg_hash) + "\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_csv(path):
    """Read back a CSV artifact; returns (rows, header_comment)."""
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        comment = first if first.startswith("#") else None
        body = fh.read() if comment else first + "\n" + fh.read()
    rows = list(csv.DictReader(io.StringIO(body)))
    return rows, comment


def write_mesh(path, mesh: ManifoldMesh, cfg_hash):
    doc = {"artifact": "orbitcont-mesh", "version": __version__,
           "config_hash": cfg_hash, **mesh.to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_mesh(path):
    with open(path) as fh:
        doc = json.load(fh)
    return ManifoldMesh.from_dict(doc), doc


def write_orbit(path, po: PeriodicOrbit, cfg_hash):
    doc = {"artifact": "orbitcont-orbit", "version": __version__,
           "config_hash": cfg_hash, **po.to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def read_orbit(path):
    with open(path) as fh:
        doc = json.load(fh)
    return PeriodicOrbit.from_dict(doc), doc


# ---------------------------------------------------------------------------
# checkpointing

def write_checkpoint(path, *, cfg_hash, step, ds, unknowns: Unknowns, tangent,
                     right_bcs, par_ref, mesh: ManifoldMesh, diagram,
                     convergence, timing, orbit: PeriodicOrbit = None):
    """Atomic checkpoint write: everything needed to resume bit-for-bit."""
    doc = {
        "artifact": "orbitcont-checkpoint",
        "version": __version__,
        "config_hash": cfg_hash,
        "step": int(step),
        "ds": float(ds),
        "unknowns": unknowns.to_dict(),
        "tangent": np.asarray(tangent).tolist(),
        "right_bcs": [bc.to_dict() for bc in right_bcs],
        "par_ref": float(par_ref),
        "mesh": mesh.to_dict(),
        "diagram": diagram,
        "convergence": convergence,
        "timing": timing,
    }
    if orbit is not None:
        doc["orbit"] = orbit.to_dict()
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def read_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("artifact") != "orbitcont-checkpoint":
        raise ConfigError(f"{path} is not a checkpoint file")
    return {
        "config_hash": doc["config_hash"],
        "step": doc["step"],
        "ds": doc["ds"],
        "unknowns": Unknowns.from_dict(doc["unknowns"]),
        "tangent": np.array(doc["tangent"], dtype=float),
        "right_bcs": [BoundaryCondition.from_dict(d) for d in doc["right_bcs"]],
        "par_ref": doc["par_ref"],
        "mesh": ManifoldMesh.from_dict(doc["mesh"]),
        "diagram": doc["diagram"],
        "convergence": doc["convergence"],
        "timing": doc["timing"],
        "orbit": (PeriodicOrbit.from_dict(doc["orbit"])
                  if "orbit" in doc else None),
    }


DIAGRAM_FIELDS = ["step", "par", "eps", "total_time", "total_arclength", "k",
                  "ds", "newton_iterations", "fold"]
CONVERGENCE_FIELDS = ["step", "newton_iteration", "residual", "gmres_iterations"]
TIMING_FIELDS = ["step", "wall_time", "segment_time", "k", "workers"]


def write_run_artifacts(outdir, run, cfg_hash, orbit: PeriodicOrbit = None):
    """Write the full artifact set of a continuation run into ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    write_mesh(os.path.join(outdir, "mesh.json"), run.mesh, cfg_hash)
    write_csv(os.path.join(outdir, "diagram.csv"), run.diagram,
              DIAGRAM_FIELDS, cfg_hash)
    write_csv(os.path.join(outdir, "convergence.csv"), run.convergence,
              CONVERGENCE_FIELDS, cfg_hash)
    write_csv(os.path.join(outdir, "timing.csv"), run.timing,
              TIMING_FIELDS, cfg_hash)
    if orbit is not None:
        write_orbit(os.path.join(outdir, "orbit.json"), orbit, cfg_hash)

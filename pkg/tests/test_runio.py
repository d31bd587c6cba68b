import numpy as np
import pytest

from orbitcont import ConfigError, PeriodicOrbit
from orbitcont import runio
from orbitcont.bvp import BoundaryCondition, Unknowns
from orbitcont.continuation import ManifoldMesh, MeshOrbit

BASE_CONFIG = {
    "model": {"name": "lorenz"},
    "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-12},
    "orbit": {"guess_point": [-13.7638, -19.5789, 27.0], "guess_period": 1.5587},
    "boundary": {"mode": "unstable-po", "eps0": 1e-4},
    "conditions": [{"kind": "arclength", "target": 20.0}],
    "continuation": {"ds0": 0.05, "max_steps": 4},
}


def write_cfg(tmp_path, cfg):
    path = tmp_path / "run.yaml"
    runio.dump_config(cfg, path)
    return path


def test_config_roundtrip_identity(tmp_path):
    path = write_cfg(tmp_path, BASE_CONFIG)
    cfg = runio.load_config(path)
    path2 = tmp_path / "again.yaml"
    runio.dump_config(cfg, path2)
    assert runio.load_config(path2) == cfg
    assert runio.config_hash(cfg) == runio.config_hash(runio.load_config(path))


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(surprise=1),
    lambda c: c["continuation"].update(stepsize=0.1),
    lambda c: c["boundary"].update(epsilon=1e-4),
    lambda c: c["conditions"].append({"kind": "arclength", "target": 1.0, "tol": 0}),
    lambda c: c["conditions"].append({"kind": "sphere", "target": 1.0}),
    lambda c: c["conditions"].append({"target": 1.0}),
])
def test_unknown_keys_rejected(tmp_path, mutate):
    cfg = {k: (dict(v) if isinstance(v, dict) else [dict(x) for x in v])
           for k, v in BASE_CONFIG.items()}
    mutate(cfg)
    path = write_cfg(tmp_path, cfg)
    with pytest.raises(ConfigError):
        runio.load_config(path)


def test_config_hash_sensitivity():
    a = runio.config_hash(BASE_CONFIG)
    b = dict(BASE_CONFIG)
    b["continuation"] = {"ds0": 0.06, "max_steps": 4}
    assert a != runio.config_hash(b)


def test_build_field_errors():
    with pytest.raises(ConfigError):
        runio.build_field({"model": {"name": "unknown-system"}})
    with pytest.raises(ConfigError):
        runio.build_field({})
    with pytest.raises(ConfigError):
        runio.build_field({"model": {"name": "plugin"}})


def test_build_conditions():
    bcs = runio.build_conditions(BASE_CONFIG)
    assert len(bcs) == 1 and bcs[0].kind == "arclength"
    with pytest.raises(ConfigError):
        runio.build_conditions({"conditions": []})


def test_csv_roundtrip_with_header(tmp_path):
    rows = [{"step": 0, "par": -9.2}, {"step": 1, "par": -9.1}]
    path = tmp_path / "t.csv"
    runio.write_csv(path, rows, ["step", "par"], "deadbeef0000")
    back, comment = runio.read_csv(path)
    assert "deadbeef0000" in comment
    assert [r["par"] for r in back] == ["-9.2", "-9.1"]


def _tiny_mesh():
    u = Unknowns(np.zeros((0, 3)), np.array([0.5]), -9.0)
    orbit = MeshOrbit(samples=np.ones((4, 3)), start=np.zeros(3), par=-9.0,
                      total_time=0.7, total_arclength=20.0, unknowns=u)
    return ManifoldMesh(orbits=[orbit], metadata={"field": "lorenz"})


def test_mesh_file_roundtrip(tmp_path):
    mesh = _tiny_mesh()
    path = tmp_path / "mesh.json"
    runio.write_mesh(path, mesh, "cafe00000000")
    mesh2, doc = runio.read_mesh(path)
    assert doc["config_hash"] == "cafe00000000"
    assert doc["artifact"] == "orbitcont-mesh"
    assert np.array_equal(mesh2.orbits[0].samples, mesh.orbits[0].samples)


def test_orbit_file_roundtrip(tmp_path):
    po = PeriodicOrbit(base_point=np.array([1.0, 2.0, 3.0]), period=1.5,
                       mu1=4.7, u1=np.array([0.1, 0.2, 0.3]), residual=1e-12)
    path = tmp_path / "orbit.json"
    runio.write_orbit(path, po, "beef00000000")
    po2, doc = runio.read_orbit(path)
    assert doc["version"]
    assert po2.period == po.period and po2.mu1 == po.mu1


def test_checkpoint_roundtrip(tmp_path):
    u = Unknowns(np.array([[1.0, 2.0, 3.0]]), np.array([0.3, 0.4]), -8.0)
    bcs = [BoundaryCondition.poincare([0, 0, 1.0], 30.0),
           BoundaryCondition.arclength(12.0)]
    path = tmp_path / "ck.json"
    runio.write_checkpoint(
        path, cfg_hash="f00d00000000", step=7, ds=0.125, unknowns=u,
        tangent=np.linspace(0, 1, u.N), right_bcs=bcs, par_ref=-9.2,
        mesh=_tiny_mesh(), diagram=[{"step": 0}], convergence=[], timing=[])
    ck = runio.read_checkpoint(path)
    assert ck["step"] == 7 and ck["ds"] == 0.125 and ck["par_ref"] == -9.2
    assert np.array_equal(ck["unknowns"].pack(), u.pack())
    assert ck["right_bcs"][0].kind == "poincare"
    assert np.allclose(ck["right_bcs"][0].normal, [0, 0, 1])
    assert ck["right_bcs"][1].target == 12.0
    assert ck["orbit"] is None


def test_checkpoint_rejects_other_files(tmp_path):
    path = tmp_path / "not_ck.json"
    path.write_text('{"artifact": "something-else"}')
    with pytest.raises(ConfigError):
        runio.read_checkpoint(path)


def test_boundary_mode_validation():
    cfg = {"boundary": {"mode": "sideways-po"}}
    with pytest.raises(ConfigError):
        runio.build_left_boundary(cfg)
    with pytest.raises(ConfigError):
        runio.build_left_boundary({"boundary": {"mode": "unstable-eq"}})

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from orbitcont import OrbitContError
from orbitcont.bvp import (
    BoundaryCondition,
    LeftBoundary,
    ShootingProblem,
    Unknowns,
    bc_value_and_gradient,
)


def lorenz_k3_problem(lorenz_field, lorenz_po, icfg, workers=1):
    left = LeftBoundary.periodic_orbit(lorenz_po)
    bcs = [BoundaryCondition.poincare([0.0, 0.0, 1.0], 30.0),
           BoundaryCondition.fixed_time(0.3),
           BoundaryCondition.arclength(12.0)]
    return ShootingProblem(lorenz_field, left, bcs, icfg, workers=workers)


# ---------------------------------------------------------------------------
# unknown packing

@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=2, max_value=5),
       st.integers(min_value=0, max_value=10_000))
def test_unknowns_pack_roundtrip(k, n, seed):
    rng = np.random.default_rng(seed)
    u = Unknowns(rng.standard_normal((k - 1, n)) if k > 1 else np.zeros((0, n)),
                 rng.uniform(0.1, 2.0, size=k), float(rng.standard_normal()))
    assert u.N == (k - 1) * n + k + 1
    u2 = Unknowns.unpack(u.pack(), k, n)
    assert np.array_equal(u2.pack(), u.pack())
    u3 = Unknowns.from_dict(u.to_dict())
    assert np.array_equal(u3.pack(), u.pack())


def test_unknowns_unpack_wrong_length():
    with pytest.raises(ValueError):
        Unknowns.unpack(np.zeros(7), k=2, n=3)


# ---------------------------------------------------------------------------
# boundary data

def test_poincare_normal_is_normalized():
    bc = BoundaryCondition.poincare([0.0, 2.0, 0.0], 4.0)
    assert np.allclose(bc.normal, [0, 1, 0])
    assert bc.target == 2.0  # offset rescaled with the normal


def test_condition_validation():
    with pytest.raises(ValueError):
        BoundaryCondition.fixed_time(-1.0)
    with pytest.raises(ValueError):
        BoundaryCondition.poincare([0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        BoundaryCondition.arclength(0.0)


def test_left_boundary_ray_derivative(lorenz_po):
    left = LeftBoundary.periodic_orbit(lorenz_po)
    h = 1e-4
    for par in (-9.0, -5.0):
        fd = (left.point(par + h) - left.point(par - h)) / (2 * h)
        assert np.allclose(left.dpoint(par), fd, rtol=1e-5)
    assert left.time_scale == lorenz_po.period


def test_left_boundary_requires_expansion(lorenz_po):
    from orbitcont import PeriodicOrbit

    po = PeriodicOrbit(base_point=lorenz_po.base_point, period=1.0,
                       mu1=0.5, u1=np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        LeftBoundary.periodic_orbit(po)
    # and a contracting pair is exactly what reverse time needs
    LeftBoundary.periodic_orbit(po, reverse_time=True)


def test_left_boundary_equilibrium_circle():
    point = np.array([1.0, 2.0, 3.0])
    vecs = np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 0.0]])
    left = LeftBoundary.equilibrium(point, vecs, radius=0.1, rates=(0.5, 2.0))
    assert abs(left.time_scale - 1.0) < 1e-12  # 1/sqrt(0.5*2)
    th = 0.7
    p = left.point(th)
    assert abs(np.linalg.norm(p - point) - 0.1) < 1e-12
    h = 1e-7
    fd = (left.point(th + h) - left.point(th - h)) / (2 * h)
    assert np.allclose(left.dpoint(th), fd, rtol=1e-6)


# ---------------------------------------------------------------------------
# seeding and residual

def test_seed_solution_residual_small(lorenz_field, lorenz_po, icfg):
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    u = p.seed_initial_solution(eps0=1e-4)
    F = p.residual(u)
    assert F.shape == (p.N - 1,)
    assert np.linalg.norm(F) < 1e-7


def test_seed_requires_positive_eps(lorenz_field, lorenz_po, icfg):
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    with pytest.raises(ValueError):
        p.seed_initial_solution(eps0=-1.0)
    with pytest.raises(ValueError):
        p.seed_initial_solution()


def test_residual_against_independent_integrator(lorenz_field, lorenz_po, icfg):
    """Cross-check the residual with scipy's integrator on the augmented
    (state + speed quadrature) system."""
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    u = p.seed_initial_solution(eps0=1e-4)
    # perturb so the residual is nonzero
    z = u.pack()
    z[:-1] += 1e-3
    up = Unknowns.unpack(z, p.k, p.n)
    F = p.residual(up)

    def aug(t, y):
        dx = lorenz_field(y[:3])
        return np.concatenate([dx, [np.linalg.norm(dx)]])

    starts = [p.left.point(up.par)] + [up.interior[i] for i in range(p.k - 1)]
    P = lorenz_po.period
    oracle = []
    ends = []
    for i in range(p.k):
        sol = solve_ivp(aug, (0.0, up.times[i] * P),
                        np.concatenate([starts[i], [0.0]]),
                        rtol=1e-12, atol=1e-13, method="DOP853")
        ends.append(sol.y[:3, -1])
        arcs = sol.y[3, -1]
        bc = p.right_bcs[i]
        if bc.kind == "fixed_time":
            oracle.append(up.times[i] * P - bc.target)
        elif bc.kind == "poincare":
            oracle.append(bc.normal @ ends[i] - bc.target)
        else:
            oracle.append(arcs - bc.target)
    glue = [up.interior[i] - ends[i] for i in range(p.k - 1)]
    F_oracle = np.concatenate(glue + [np.asarray(oracle)])
    assert np.linalg.norm(F - F_oracle) < 1e-7 * (1 + np.linalg.norm(F_oracle))


def test_nonpositive_times_rejected(lorenz_field, lorenz_po, icfg):
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    u = p.seed_initial_solution(eps0=1e-4)
    u.times[1] = -0.1
    with pytest.raises(OrbitContError):
        p.residual(u)


def test_wrong_k_rejected(lorenz_field, lorenz_po, icfg):
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    bad = Unknowns(np.zeros((0, 3)), np.array([0.5]), -9.0)
    with pytest.raises(ValueError):
        p.residual(bad)


# ---------------------------------------------------------------------------
# jacobian

def test_jacobian_matches_finite_differences(lorenz_field, lorenz_po, icfg):
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    u = p.seed_initial_solution(eps0=1e-4)
    rng = np.random.default_rng(11)
    tangent = rng.standard_normal(p.N)
    tangent /= np.linalg.norm(tangent)
    z = u.pack()
    h = 1e-6 * (1 + np.linalg.norm(z))
    for _ in range(5):
        v = rng.standard_normal(p.N)
        v /= np.linalg.norm(v)
        Jv = p.jacobian_apply(u, tangent, v)
        Fp = p.residual(Unknowns.unpack(z + h * v, p.k, p.n))
        Fm = p.residual(Unknowns.unpack(z - h * v, p.k, p.n))
        fd = np.concatenate([(Fp - Fm) / (2 * h), [tangent @ v]])
        assert np.linalg.norm(Jv - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


def test_fd_jvp_mode_agrees_with_variational(lorenz_field, lorenz_po, icfg):
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    u = p.seed_initial_solution(eps0=1e-4)
    tangent = np.zeros(p.N)
    tangent[-1] = 1.0
    v = np.linspace(-1.0, 1.0, p.N)
    exact = p.jacobian_apply(u, tangent, v)
    p_fd = ShootingProblem(lorenz_field, p.left, p.right_bcs, icfg, jvp_mode="fd")
    approx = p_fd.jacobian_apply(u, tangent, v)
    assert np.linalg.norm(exact - approx) < 1e-5 * max(1.0, np.linalg.norm(exact))


def test_dense_block_structure(lorenz_field, lorenz_po, icfg):
    """The gluing rows have identity diagonal blocks, flow-Jacobian
    subdiagonal blocks, and zeros elsewhere in the interior-point columns."""
    p = lorenz_k3_problem(lorenz_field, lorenz_po, icfg)
    u = p.seed_initial_solution(eps0=1e-4)
    tangent = np.zeros(p.N)
    tangent[-1] = 1.0
    A = p.assemble_dense(u, tangent)
    n, k = p.n, p.k
    ni = (k - 1) * n
    glue = A[:ni, :ni]
    for i in range(k - 1):
        for j in range(k - 1):
            blk = glue[i * n:(i + 1) * n, j * n:(j + 1) * n]
            if i == j:
                assert np.array_equal(blk, np.eye(n))
            elif j == i - 1:
                assert np.linalg.norm(blk) > 1e-3  # -J of segment i
            else:
                assert np.allclose(blk, 0.0, atol=1e-12)
    # the parameter column only feeds segment 1 (its gluing rows, its BC row)
    # and the border row
    par_col = A[:, -1]
    assert np.allclose(par_col[n:ni], 0.0, atol=1e-10)
    # time columns: segment i's time only enters its own rows
    for i in range(k):
        col = A[:, ni + i]
        for j in range(k - 1):
            if j != i:
                assert np.allclose(col[j * n:(j + 1) * n], 0.0, atol=1e-10)
    # border row is the tangent
    assert np.allclose(A[-1], tangent, atol=1e-14)


def test_dense_limit_enforced(lorenz_field, lorenz_po, icfg):
    left = LeftBoundary.periodic_orbit(lorenz_po)
    bcs = [BoundaryCondition.fixed_time(0.1)] * 3
    p = ShootingProblem(lorenz_field, left, bcs, icfg, dense_limit=5)
    u = p.seed_initial_solution(eps0=1e-4)
    with pytest.raises(ValueError):
        p.assemble_dense(u, np.zeros(p.N))


def test_invalid_jvp_mode(lorenz_field, lorenz_po, icfg):
    left = LeftBoundary.periodic_orbit(lorenz_po)
    with pytest.raises(ValueError):
        ShootingProblem(lorenz_field, left, [BoundaryCondition.fixed_time(1.0)],
                        icfg, jvp_mode="symbolic")


# ---------------------------------------------------------------------------
# worker-pool determinism

def test_residual_bitwise_identical_across_workers(lorenz_field, lorenz_po, icfg):
    p1 = lorenz_k3_problem(lorenz_field, lorenz_po, icfg, workers=1)
    p3 = lorenz_k3_problem(lorenz_field, lorenz_po, icfg, workers=3)
    u = p1.seed_initial_solution(eps0=1e-4)
    assert np.array_equal(p1.residual(u), p3.residual(u))
    t = np.zeros(p1.N)
    t[-1] = 1.0
    v = np.linspace(0.0, 1.0, p1.N)
    assert np.array_equal(p1.jacobian_apply(u, t, v), p3.jacobian_apply(u, t, v))


# ---------------------------------------------------------------------------
# bc_value_and_gradient diagnostics

def test_bc_gradient_fixed_time(lorenz_field, lorenz_po, icfg):
    from orbitcont import integrate

    seg = integrate(lorenz_field, np.array([1.0, 1.0, 20.0]), 0.4, icfg)
    val, grad, dT = bc_value_and_gradient(BoundaryCondition.fixed_time(0.4),
                                          seg, lorenz_field, icfg)
    assert val == 0.4 and dT == 1.0
    assert np.array_equal(grad, np.zeros(3))


@pytest.mark.parametrize("kind", ["poincare", "arclength"])
def test_bc_gradient_matches_fd(kind, lorenz_field, icfg):
    from orbitcont import integrate

    x0 = np.array([2.0, -1.0, 21.0])
    T = 0.3
    if kind == "poincare":
        bc = BoundaryCondition.poincare([0.0, 0.0, 1.0], 20.0)
    else:
        bc = BoundaryCondition.arclength(1.0)
    seg = integrate(lorenz_field, x0, T, icfg)
    val, grad, dT = bc_value_and_gradient(bc, seg, lorenz_field, icfg)
    h = 1e-6

    def value_at(x):
        traj = integrate(lorenz_field, x, T, icfg, with_arclength=True)
        if kind == "poincare":
            return bc.normal @ traj.final_state - bc.target
        return traj.arclength()

    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (value_at(x0 + e) - value_at(x0 - e)) / (2 * h)
        assert abs(grad[j] - fd) < 1e-5 * (1 + abs(fd))

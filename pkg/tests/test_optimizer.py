import itertools
from dataclasses import dataclass

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from jsccrelay.channel import FadingSpec, Network
from jsccrelay.eed import WORST, EedModel, network_eed
from jsccrelay.errors import ConfigurationError
from jsccrelay.hiermod import HierScheme
from jsccrelay.link import Integrator
from jsccrelay.optimizer.gp import (
    PowerCandidate,
    initial_candidates,
    minimize_dual_function,
    run_generalized_programming,
)
from jsccrelay.optimizer.master import solve_master_dual, solve_master_lp
from jsccrelay.optimizer.objective import EedObjective, interpolate, report_network_eed
from jsccrelay.optimizer.search import compass_search
from jsccrelay.optimizer.simplex import INFEASIBLE, UNBOUNDED, linprog

# --- simplex ------------------------------------------------------------------

def test_simplex_small_example():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    res = linprog([-1.0, -1.0], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6])
    assert res.ok
    np.testing.assert_allclose(res.x, [1.6, 1.2], atol=1e-12)


def test_simplex_infeasible():
    assert linprog([1.0], A_ub=[[1.0]], b_ub=[-1.0]).status == INFEASIBLE


def test_simplex_unbounded():
    assert linprog([-1.0], A_ub=[[-1.0]], b_ub=[0.0]).status == UNBOUNDED


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 4))
def test_simplex_matches_reference_solver(seed, n, m):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.1, 2.0, m)
    A_eq, b_eq = np.ones((1, n)), [1.0]
    ours = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq)
    ref = scipy.optimize.linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert ours.ok == (ref.status == 0)
    if ours.ok:
        assert ours.fun == pytest.approx(ref.fun, abs=1e-9)


# --- master problem and dual ----------------------------------------------------

def test_master_single_candidate():
    m = solve_master_lp([0.4], [[-0.2], [-0.1]])
    np.testing.assert_allclose(m.lam, [1.0])
    assert m.z == pytest.approx(0.4)


def test_master_picks_better_column():
    m = solve_master_lp([0.5, 0.3], [[-0.2, -0.1], [-0.3, -0.4]])
    np.testing.assert_allclose(m.lam, [0.0, 1.0], atol=1e-12)
    assert m.z == pytest.approx(0.3)


def test_dual_single_candidate():
    d = solve_master_dual([0.4], [[-0.2], [-0.1]])
    np.testing.assert_allclose(d.nu, [0.0, 0.0], atol=1e-12)
    assert d.theta == pytest.approx(0.4)


def test_master_infeasible():
    assert not solve_master_lp([0.1, 0.2], [[0.1, 0.3], [0.2, 0.1]]).feasible


def test_master_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        solve_master_lp([np.nan], [[-0.1]])
    with pytest.raises(ConfigurationError):
        solve_master_lp([0.1, 0.2], [[-0.1]])


def vertex_oracle(obj, rows):
    """Minimum over all basic feasible points of {lam >= 0, 1'lam = 1, rows lam <= 0}."""
    k = len(obj)
    cons = [np.eye(k)[i] for i in range(k)] + list(rows)
    best = np.inf
    for pick in itertools.combinations(range(len(cons)), k - 1):
        M = np.vstack([np.ones(k)] + [cons[i] for i in pick])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        lam = np.linalg.solve(M, np.eye(k)[0])
        if np.all(lam >= -1e-12) and np.all(rows @ lam <= 1e-12):
            best = min(best, float(obj @ lam))
    return best


def random_master(seed, k):
    rng = np.random.default_rng(seed)
    obj = rng.uniform(0, 1, k)
    rows = rng.uniform(-0.5, 0.5, (2, k))
    rows[:, 0] = -rng.uniform(0.05, 0.5, 2)  # keep the instance feasible
    return obj, rows


@pytest.mark.parametrize("seed", range(20))
def test_master_vertex_oracle(seed):
    obj, rows = random_master(seed, 3)
    assert solve_master_lp(obj, rows).z == pytest.approx(vertex_oracle(obj, rows), abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("k", [1, 3, 8])
def test_strong_duality(seed, k):
    obj, rows = random_master(seed, k)
    m, d = solve_master_lp(obj, rows), solve_master_dual(obj, rows)
    assert abs(m.z - d.theta) <= 1e-8 * max(1.0, abs(m.z))
    assert np.all(d.nu >= 0)
    np.testing.assert_allclose(m.lam.sum(), 1.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_dual_complementary_slackness_oracle(seed):
    obj, rows = random_master(seed, 5)
    m = solve_master_lp(obj, rows)
    d = solve_master_dual(obj, rows)
    # theta - nu'rows_l = obj_l on the support of lam, nu_i = 0 off the tight rows
    support = np.flatnonzero(m.lam > 1e-10)
    tight = np.flatnonzero(np.abs(rows @ m.lam) < 1e-10)
    M = np.hstack([np.ones((support.size, 1)), -rows[tight][:, support].T])
    sol, *_ = np.linalg.lstsq(M, obj[support], rcond=None)
    if M.shape[0] < M.shape[1]:
        pytest.skip("degenerate basis")
    assert d.theta == pytest.approx(sol[0], abs=1e-9)


# --- compass search ----------------------------------------------------------------

def test_compass_finds_box_minimum():
    target = np.array([0.3, 0.7, 0.0])
    res = compass_search(lambda x: ((x - target) ** 2).sum(axis=1), np.full((1, 3), 0.5))
    np.testing.assert_allclose(res.x, target, atol=1e-3)


def test_compass_respects_box():
    res = compass_search(lambda x: -x.sum(axis=1), np.zeros((2, 2)))
    np.testing.assert_array_equal(res.x, [1.0, 1.0])


# --- generalized programming ---------------------------------------------------------

@dataclass
class Quadratic:
    """sum over nodes of ||beta - a||^2: a convex stand-in for the EED."""

    a: np.ndarray
    relayed: bool = False

    @property
    def num_layers(self):
        return self.a.shape[-1]

    def __call__(self, beta_s, beta_r=None):
        out = ((np.atleast_2d(beta_s) - self.a[0]) ** 2).sum(axis=1)
        if self.relayed:
            out = out + ((np.atleast_2d(beta_r) - self.a[1]) ** 2).sum(axis=1)
        return out


def simplex_projection(v):
    """Euclidean projection onto {b >= 0, 1'b <= 1}."""
    b = np.clip(v, 0, None)
    if b.sum() <= 1:
        return b
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    r = np.flatnonzero(u - css / np.arange(1, len(v) + 1) > 0)[-1]
    return np.clip(v - css[r] / (r + 1), 0, None)


@pytest.mark.parametrize("a,relayed", [
    ([[0.8, 0.6]], False),
    ([[0.7, 0.2, 0.5]], False),
    ([[0.3, 0.2]], False),
    ([[0.9, 0.4], [0.2, 0.1]], True),
])
def test_gp_quadratic_oracle(a, relayed):
    f = Quadratic(np.array(a, dtype=float), relayed)
    opt = sum(((simplex_projection(row) - row) ** 2).sum() for row in f.a)
    res = run_generalized_programming(f, epsilon=1e-4, max_iters=100)
    assert res.converged
    assert res.d_min <= opt + 1e-4
    assert res.d_max >= opt - 1e-4
    assert res.objective == pytest.approx(opt, abs=1e-4)
    assert res.best.feasible


def check_trace(res, objective):
    start = initial_candidates(objective.num_layers, objective.relayed)[0]
    f1 = float(objective(np.array([start.beta_s]), np.array([start.beta_r]) if start.beta_r else None)[0])
    slack = -start.slacks
    zs = [r.z for r in res.trace]
    assert all(b <= a + 1e-12 for a, b in zip(zs, zs[1:]))
    for r in res.trace:
        assert abs(r.z - r.theta) <= 1e-8 * max(1.0, abs(r.z))
        assert 0 <= r.nu_s <= (f1 - r.theta) / slack[0] + 1e-9
        if objective.relayed:
            assert 0 <= r.nu_r <= (f1 - r.theta) / slack[1] + 1e-9
    gaps = [r.d_max - r.d_min for r in res.trace]
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("a,relayed", [([[0.8, 0.6]], False), ([[0.9, 0.4], [0.2, 0.1]], True)])
def test_gp_trace_invariants_quadratic(a, relayed):
    f = Quadratic(np.array(a, dtype=float), relayed)
    check_trace(run_generalized_programming(f, 1e-4), f)


def test_gp_needs_interior_start():
    f = Quadratic(np.array([[0.5, 0.5]]))
    with pytest.raises(ConfigurationError):
        run_generalized_programming(f, initial=[PowerCandidate((0.5, 0.5))])


@pytest.mark.parametrize("kwargs", [{"epsilon": 0.0}, {"max_iters": 0}])
def test_gp_rejects_settings(kwargs):
    with pytest.raises(ConfigurationError):
        run_generalized_programming(Quadratic(np.array([[0.5, 0.5]])), **kwargs)


def test_power_candidate_normalized():
    c = PowerCandidate((0.8, 0.4), (0.2, 0.1)).normalized()
    assert c.beta_s == pytest.approx((2 / 3, 1 / 3))
    assert c.beta_r == (0.2, 0.1)
    assert c.feasible


def test_power_candidate_rejects_negative():
    with pytest.raises(ConfigurationError):
        PowerCandidate((-0.1, 0.5))


# --- EED objective ---------------------------------------------------------------------

def small_network(relayed=True, n=2, rho=2.0):
    sd = tuple(FadingSpec(rho, g) for g in (0.3, 1.5, 0.8)[:n])
    if not relayed:
        return Network(sd)
    return Network(sd, FadingSpec(rho, 2.0), tuple(FadingSpec(rho, g) for g in (1.2, 0.9, 2.5)[:n]))


def qpsk_objective(relayed=True, energy=10.0, weights=WORST, draws=4000, seed=0, n=2):
    return EedObjective(("QPSK", "QPSK"), small_network(relayed, n), EedModel((2, 2)),
                        energy, energy, weights, draws=draws, seed=seed)


def test_interpolation_reproduces_cubics():
    grid = np.linspace(-3, 5, 17)
    x = np.array([-2.9, -1.0, 0.13, 4.99])

    def cubic(t):
        return 0.5 * t**3 - t**2 + 2 * t - 1

    np.testing.assert_allclose(interpolate(x, grid, cubic(grid)[:, None])[:, 0], cubic(x), atol=1e-12)


@pytest.mark.parametrize("relayed", [True, False])
@pytest.mark.parametrize("kinds,beta_s,beta_r", [
    (("QPSK", "QPSK"), (0.8, 0.2), (0.7, 0.3)),
    (("BPSK", "BPSK", "QAM16"), (0.75, 0.2, 0.05), (0.6, 0.3, 0.1)),
])
def test_objective_matches_exact_network_eed(relayed, kinds, beta_s, beta_r):
    net = small_network(relayed)
    model = EedModel(tuple(HierScheme.of(kinds, beta_s).rates))
    obj = EedObjective(kinds, net, model, 10.0, 10.0, draws=3000, seed=5)
    got = obj.per_user(np.array([beta_s]), np.array([beta_r]))[0]
    src = HierScheme.of(kinds, beta_s, symbol_energy=10.0)
    rel = HierScheme.of(kinds, beta_r, symbol_energy=10.0) if relayed else None
    exact = network_eed(src, rel, net, model, Integrator(3000, 5))
    np.testing.assert_allclose(got, exact.mean, atol=2e-5)
    report = report_network_eed(kinds, beta_s, beta_r if relayed else None, net, model, 10.0, 10.0,
                                draws=3000, seed=5)
    np.testing.assert_allclose(report.mean, exact.mean, atol=2e-5)
    np.testing.assert_allclose(report.stderr, exact.stderr, rtol=1e-2, atol=1e-7)


def test_objective_is_batch_consistent():
    obj = qpsk_objective()
    bs = np.array([[0.8, 0.2], [0.6, 0.4], [0.8, 0.2]])
    br = np.array([[0.7, 0.3], [0.5, 0.5], [0.9, 0.1]])
    batch = obj(bs, br)
    single = [obj(bs[i:i + 1], br[i:i + 1])[0] for i in range(3)]
    np.testing.assert_allclose(batch, single, atol=0)


def test_objective_weights_and_worst():
    obj = qpsk_objective(weights=[0.25, 0.75])
    users = obj.per_user([[0.8, 0.2]], [[0.7, 0.3]])[0]
    assert obj([[0.8, 0.2]], [[0.7, 0.3]])[0] == pytest.approx(users @ [0.25, 0.75])
    assert qpsk_objective()([[0.8, 0.2]], [[0.7, 0.3]])[0] == pytest.approx(users.max())


def test_objective_bounds_and_crn(rng):
    obj = qpsk_objective()
    b = rng.uniform(0, 1, (200, 4))
    v = obj(b[:, :2], b[:, 2:])
    assert np.all(v >= obj.model.floor - 1e-12) and np.all(v <= obj.model.sigma2 + 1e-12)
    again = qpsk_objective()(b[:, :2], b[:, 2:])
    np.testing.assert_array_equal(v, again)


def test_huge_multiplier_drives_power_to_zero():
    obj = qpsk_objective()
    cand, _ = minimize_dual_function([1e3, 1e3], obj)
    np.testing.assert_allclose(cand.beta_s + cand.beta_r, 0.0, atol=1e-12)


def test_zero_multiplier_perfect_channels_reach_floor():
    obj = qpsk_objective(energy=1e12)
    cand, g = minimize_dual_function([0.0, 0.0], obj)
    assert g == pytest.approx(2.0**-8, abs=1e-12)


@pytest.mark.parametrize("relayed", [False, True])
@pytest.mark.parametrize("nu", [(0.0, 0.0), (0.05, 0.02), (0.3, 0.3)])
def test_search_beats_coarse_grid(relayed, nu):
    obj = qpsk_objective(relayed, draws=2000, n=1)
    nu = np.array(nu[: 2 if relayed else 1])
    cand, g = minimize_dual_function(nu, obj)
    axis = np.linspace(0, 1, 21)
    node = np.array(list(itertools.product(axis, axis)))
    pen_node = node.sum(axis=1) - 1
    if relayed:
        best = np.inf
        for b in node:  # source row fixed, every relay row at once
            vals = obj(np.tile(b, (len(node), 1)), node) + nu[0] * (b.sum() - 1) + nu[1] * pen_node
            best = min(best, vals.min())
    else:
        best = (obj(node) + nu[0] * pen_node).min()
    assert g <= best + 1e-3


def test_gp_on_eed_objective_is_reproducible_and_valid():
    runs = [run_generalized_programming(qpsk_objective(draws=2000), 1e-3, 40) for _ in range(2)]
    a, b = runs
    assert a.trace == b.trace
    assert a.best == b.best
    check_trace(a, qpsk_objective(draws=2000))
    m = EedModel((2, 2))
    assert m.floor <= a.objective <= m.sigma2

"""Acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict that pytest prints in its terminal
summary.  The optimizer sweep on the default scenario is run once and
shared by criteria 4 to 7.
"""
import time

import numpy as np
import pytest
import scipy.stats

from jsccrelay.channel import FadingSpec, FixedGain, LinkTriple, Network, nakagami_cdf, nakagami_pdf
from jsccrelay.eed import EedModel, expected_eed, network_eed
from jsccrelay.hiermod import HierScheme, layer_ser_profile
from jsccrelay.link import Integrator
from jsccrelay.optimizer.driver import optimize_point
from jsccrelay.optimizer.objective import EedObjective
from jsccrelay.scenario import DEFAULT_SCHEMES, P1, P2, Scenario
from jsccrelay.simkit import SimConfig, simulate, simulate_link

pytestmark = pytest.mark.acceptance

SCHEMES = {
    "QPSK/QPSK": ("QPSK", "QPSK"),
    "QAM64": ("QAM64",),
    "QPSK/QAM16": ("QPSK", "QAM16"),
    "BPSK/BPSK/QAM16": ("BPSK", "BPSK", "QAM16"),
}


def power_split(L: int, base: float) -> np.ndarray:
    """Base layer gets ``base``; a third layer gets a fifth of the remainder."""
    rest = {1: [], 2: [1.0], 3: [0.8, 0.2]}[L]
    return np.array([base] + [(1.0 - base) * r for r in rest])


# --- 1: SER oracle ----------------------------------------------------------

def test_criterion_1_ser_matches_simulation(acceptance):
    start = time.perf_counter()
    worst, misses, zs = 0.0, [], []
    for name, kinds in SCHEMES.items():
        L = len(kinds)
        bases = np.linspace(0.2, 1.0, 5) if L == 1 else np.linspace(0.6, 0.95, 5)
        for i, base in enumerate(bases):
            s = HierScheme.of(kinds, power_split(L, base), symbol_energy=1.0)
            for j, gain in enumerate(np.geomspace(1.0, 300.0, 5)):
                q = layer_ser_profile(gain, s).cond_ser
                sim = simulate_link(s, gain, 1_000_000, seed=1000 * i + j)
                trials = sim["cond_trials"]
                se = np.sqrt(q * (1 - q) / np.maximum(trials, 1))
                dev = np.abs(sim["cond_ser"] - q)
                for l in range(L):
                    if trials[l] == 0:
                        continue
                    z = dev[l] / se[l] if se[l] > 0 else (0.0 if dev[l] == 0 else np.inf)
                    zs.append(z)
                    worst = max(worst, z)
                    if z > 3.0:
                        misses.append(f"{name} base={base:.3f} gain={gain:.3g} layer {l + 1}: z={z:.2f}")
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 60.0
    # goodness of fit of all z scores together, reported alongside the per-point verdict
    chi2 = float(np.sum(np.square(zs)))
    p_fit = scipy.stats.chi2.sf(chi2, len(zs))
    acceptance(1, ok, f"{len(zs)} layer comparisons, max |z| = {worst:.2f}, {len(misses)} over 3, "
                      f"sum z^2 = {chi2:.0f} on {len(zs)} dof (p = {p_fit:.2f}), {elapsed:.0f} s")
    assert not misses, misses
    assert elapsed < 60.0


# --- 2: EED oracle ----------------------------------------------------------

def random_scenarios(count: int, seed: int):
    rng = np.random.default_rng(seed)
    names = list(DEFAULT_SCHEMES)
    for k in range(count):
        scheme = DEFAULT_SCHEMES[names[rng.integers(len(names))]]
        sc = Scenario(destinations=2, placement_seed=int(rng.integers(2**32)),
                      nakagami_shape=float(rng.choice([1.0, 2.0, 3.5])), schemes=(scheme,))
        L = scheme.num_layers
        beta = power_split(L, rng.uniform(0.6, 0.95)) * rng.uniform(0.8, 1.0)
        yield sc, scheme, beta, float(rng.uniform(-10.0, 20.0))


def test_criterion_2_eed_matches_simulation(acceptance):
    start = time.perf_counter()
    worst, details = 0.0, []
    for k, (sc, scheme, beta, snr) in enumerate(random_scenarios(5, 2024)):
        hs = sc.hier_scheme(scheme, beta, snr)
        relay = hs if scheme.relay else None
        network = sc.network(scheme.relay)
        model = sc.model(scheme)
        ana = network_eed(hs, relay, network, model, Integrator(200_000, 100 + k))
        rep = simulate(SimConfig(symbols_per_slot=20, slots=20_000, seed=200 + k), hs, relay, model, network)
        z = np.abs(ana.mean - rep.eed) / np.hypot(ana.stderr, rep.eed_stderr)
        worst = max(worst, float(z.max()))
        details.append(f"{scheme.name}@{snr:.1f}dB max|z|={z.max():.2f}")
    elapsed = time.perf_counter() - start
    ok = worst <= 3.0 and elapsed < 120.0
    acceptance(2, ok, f"5 scenarios, max |z| = {worst:.2f}, {elapsed:.0f} s")
    assert worst <= 3.0, details
    assert elapsed < 120.0


# --- 3: bounds --------------------------------------------------------------

def test_criterion_3_bounds(acceptance):
    rng = np.random.default_rng(3)
    kinds = list(SCHEMES.values())
    violations = 0
    for n in range(1000):
        k = kinds[rng.integers(len(kinds))]
        L = len(k)
        beta = rng.dirichlet(np.ones(L)) * rng.uniform(0.0, 1.0)
        s = HierScheme.of(k, beta, symbol_energy=float(10 ** rng.uniform(-2, 3)))
        model = EedModel(s.rates, sigma2=float(rng.uniform(0.5, 2.0)))
        means = 10 ** rng.uniform(-3, 3, 3)
        rho = float(rng.uniform(0.5, 4.0))
        links = LinkTriple(*(FadingSpec(rho, float(m)) for m in means))
        relay = s if rng.random() < 0.7 else None
        mean, _ = expected_eed(s, relay, links, model, Integrator(64, n))
        violations += not (model.floor <= mean <= model.sigma2)
    acceptance(3, violations == 0, f"1000 configurations, {violations} violations")
    assert violations == 0


# --- shared optimizer sweep -------------------------------------------------

GRID = (-15.0, -5.0, 5.0, 15.0, 25.0)
RELAY = ("relay-3L", "relay-2L", "relay-mono")


@pytest.fixture(scope="module")
def sweep():
    sc = Scenario()
    points = {(s.name, snr, P1) for s in sc.schemes for snr in GRID}
    points |= {("relay-3L", snr, m) for snr in (-15.0, 0.0, 15.0) for m in (P1, P2)}
    out = {}
    for name, snr, metric in sorted(points):
        t = time.perf_counter()
        p = optimize_point(sc, sc.scheme(name), snr, metric)
        out[name, snr, metric] = (p, time.perf_counter() - t)
    return out


def share(point) -> float:
    b = np.asarray(point.beta_s)
    return float(b[0] / b.sum())


# --- 4: duality -------------------------------------------------------------

def test_criterion_4_duality(acceptance, sweep):
    bad = []
    for key, (p, _) in sweep.items():
        gp = p.gp
        f1 = gp.state.objectives[0]  # the interior starting candidate
        slack = -gp.state.candidates[0].slacks
        zs = [r.z for r in gp.trace]
        if any(b > a for a, b in zip(zs, zs[1:])):
            bad.append(f"{key}: z increased")
        for r in gp.trace:
            if abs(r.z - r.theta) > 1e-8 * max(1.0, abs(r.z)):
                bad.append(f"{key} iter {r.iteration}: z - theta = {r.z - r.theta:.2e}")
            for nu, s in zip((r.nu_s, r.nu_r), slack):
                if not 0 <= nu <= (f1 - r.theta) / s + 1e-12:
                    bad.append(f"{key} iter {r.iteration}: multiplier {nu:.3g} out of bound")
    acceptance(4, not bad, f"{len(sweep)} runs, {sum(len(p.gp.trace) for p, _ in sweep.values())} iterations, "
                           f"{len(bad)} violations")
    assert not bad, bad[:10]


# --- 5: convergence ---------------------------------------------------------

def test_criterion_5_convergence(acceptance, sweep):
    slow = [k for k, (_, t) in sweep.items() if t >= 300.0]
    open_gap = [k for k, (p, _) in sweep.items() if not (p.gp.converged and p.gp.gap <= 1e-3 and p.gp.iterations <= 100)]
    longest = max(t for _, t in sweep.values())
    iters = max(p.gp.iterations for p, _ in sweep.values())
    ok = not slow and not open_gap
    acceptance(5, ok, f"{len(sweep)} points, max {iters} iterations, slowest {longest:.0f} s, "
                      f"{len(open_gap)} not converged")
    assert not open_gap, open_gap
    assert not slow, slow


# --- 6: power split trends ----------------------------------------------------

def test_criterion_6_power_split_trends(acceptance, sweep):
    p1 = {snr: share(sweep["relay-3L", snr, P1][0]) for snr in (-15.0, 0.0, 15.0)}
    p2 = {snr: share(sweep["relay-3L", snr, P2][0]) for snr in (-15.0, 0.0, 15.0)}
    checks = {
        "share(-15) >= 0.85": p1[-15.0] >= 0.85,
        "strictly decreasing": p1[-15.0] > p1[0.0] > p1[15.0],
        "share(15) in [0.45, 0.75]": 0.45 <= p1[15.0] <= 0.75,
        "P2 >= P1": all(p2[s] >= p1[s] for s in p1),
    }
    failed = [k for k, v in checks.items() if not v]
    detail = "P1 shares " + ", ".join(f"{s:g} dB: {v:.4f}" for s, v in p1.items())
    detail += "; P2 shares " + ", ".join(f"{v:.4f}" for v in p2.values())
    if failed:
        detail += "; failed: " + ", ".join(failed)
    acceptance(6, not failed, detail)
    assert not failed, detail


# --- 7: scheme orderings ------------------------------------------------------

def test_criterion_7_scheme_orderings(acceptance, sweep):
    obj = {(n, s): sweep[n, s, P1][0].objective for n in RELAY for s in GRID}
    low = [obj[n, -15.0] for n in RELAY]
    spread = [max(obj[n, s] for n in RELAY) - min(obj[n, s] for n in RELAY) for s in GRID]
    checks = {
        "3L < 2L < mono at -15 dB": low[0] < low[1] < low[2],
        "3L < 0.5": low[0] < 0.5,
        "mono > 0.9": low[2] > 0.9,
        "gaps shrink": all(b < a for a, b in zip(spread, spread[1:])),
        "within 0.05 at 25 dB": spread[-1] < 0.05,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = "spread " + ", ".join(f"{s:g} dB: {v:.4f}" for s, v in zip(GRID, spread))
    detail += "; -15 dB " + ", ".join(f"{v:.4f}" for v in low)
    if failed:
        detail += "; failed: " + ", ".join(failed)
    acceptance(7, not failed, detail)
    assert not failed, detail


# --- 8: degeneracies ----------------------------------------------------------

def test_criterion_8_degeneracies(acceptance):
    h = np.concatenate([[0.0], np.geomspace(1e-6, 50.0, 400)])
    errs = []
    for mean in (0.3, 1.0, 7.0):
        spec = FadingSpec(1.0, mean)
        errs.append(np.max(np.abs(nakagami_pdf(spec, h) - np.exp(-h / mean) / mean)))
        errs.append(np.max(np.abs(nakagami_cdf(spec, h) - (1.0 - np.exp(-h / mean)))))
    stats_err = float(max(errs))

    sc = Scenario(destinations=4)
    scheme = sc.scheme("relay-3L")
    hs = sc.hier_scheme(scheme, power_split(3, 0.8), 5.0)
    model = sc.model(scheme)
    net = sc.network(True)
    direct = network_eed(hs, None, net.without_relay(), model, Integrator(20_000, 4)).mean
    dead = Network(net.sd, FixedGain(0.0), net.rd, net.names)
    pipeline = [
        network_eed(hs, None, net, model, Integrator(20_000, 4)).mean,
        network_eed(hs, hs, dead, model, Integrator(20_000, 4)).mean,
    ]
    E = sc.transmit_energy(5.0)
    beta = np.array([power_split(3, 0.8)])
    obj_direct = EedObjective(scheme.layers, net.without_relay(), model, E, E, draws=5000, seed=2)
    obj_dead = EedObjective(scheme.layers, Network(net.sd, FixedGain(0.0), net.rd, net.names), model, E, E,
                            draws=5000, seed=2)
    pipe_err = max(float(np.max(np.abs(p - direct))) for p in pipeline)
    obj_err = float(np.max(np.abs(obj_dead.per_user(beta, beta) - obj_direct.per_user(beta))))
    ok = stats_err <= 1e-9 and pipe_err <= 1e-12 and obj_err <= 1e-12
    acceptance(8, ok, f"rho=1 max error {stats_err:.1e}, relay-disabled max difference {max(pipe_err, obj_err):.1e}")
    assert stats_err <= 1e-9
    assert pipe_err <= 1e-12
    assert obj_err <= 1e-12

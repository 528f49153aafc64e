"""Symbol-level Monte Carlo simulation of the two-subslot relay protocol.

Every symbol carries one independently drawn constellation point per
layer.  The source superimposes the layers, every receiver sees
``sqrt(h) x + n`` with complex Gaussian noise of variance ``N0 / 2`` per
axis and decodes layer by layer: it slices the residual with the layer's
own PAM thresholds, stops at the first wrong layer (perfect CRC) and
otherwise cancels the layer and moves on.

In the second subslot the relay forwards the layers it decoded.  In the
``"literal"`` mode it keeps the full power split ``beta_r`` and fills the
layers it lost with fresh dummy levels, which is the model behind the
analytical symbol coupling.  In the ``"renormalized"`` mode it sends only
the decoded layers, rescaled so their powers again add up to the budget.
A destination keeps the longer of the two delivered prefixes.

Besides the link and E2E tallies, every run records, per group of slots
and per transmitted source symbol, how often the direct path, the relayed
path and both of them failed.  Given the symbol the two paths see
independent gains and noise, which :func:`validate_factorization` checks.

Gains are drawn once per slot and shared by all of the slot's symbols.
Slots are processed in fixed-size chunks, each with its own random
substream, so results depend only on the seed and the configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import FixedGain, LinkTriple, Network, make_rng
from .eed import EedModel
from .errors import ConfigurationError
from .hiermod import HierScheme

__all__ = [
    "SimConfig",
    "SimReport",
    "FactorizationReport",
    "simulate",
    "simulate_link",
    "validate_factorization",
]

LITERAL = "literal"
RENORMALIZED = "renormalized"
_CHUNK_SLOTS = 256
_CHUNK_SYMBOLS = 1 << 18
_GROUPS = 32


@dataclass(frozen=True)
class SimConfig:
    symbols_per_slot: int = 100
    slots: int = 1000
    seed: int = 0
    noise_psd: float | None = None  # None: take N0 from the source scheme
    relay_mode: str = LITERAL
    use_direct: bool = True

    def __post_init__(self):
        if self.symbols_per_slot < 1 or self.slots < 1:
            raise ConfigurationError("need at least one slot and one symbol per slot")
        if self.relay_mode not in (LITERAL, RENORMALIZED):
            raise ConfigurationError(f"unknown relay mode {self.relay_mode!r}")
        if self.noise_psd is not None and not self.noise_psd > 0:
            raise ConfigurationError("noise PSD must be positive")

    @property
    def symbols(self) -> int:
        return self.symbols_per_slot * self.slots


@dataclass(frozen=True)
class SimReport:
    """Empirical statistics of one simulation run.

    ``events[n, l]``: fraction of symbols for which destination ``n``
    reconstructed exactly layers 1..l.  ``link_cum_ser[name][l]``: fraction
    of symbols whose decoded prefix on that link is shorter than ``l + 1``.
    ``link_cond_ser``/``link_cond_trials``: per-layer failure rate among the
    symbols that reached that layer, and how many did.  ``e2e_fail[n, l]``
    is the empirical E2E failure rate of prefix ``l + 1`` and
    ``relay_path_fail`` the same for the relayed path alone.
    """

    events: np.ndarray
    eed: np.ndarray
    eed_stderr: np.ndarray
    e2e_fail: np.ndarray
    e2e_stderr: np.ndarray
    relay_path_fail: np.ndarray | None
    link_cum_ser: dict
    link_cum_stderr: dict
    link_cond_ser: dict
    link_cond_trials: dict
    symbols: int
    slots: int
    path_counts: np.ndarray


# --- modulation -----------------------------------------------------------

def _amplitudes(scheme: HierScheme) -> list:
    """Per-layer PAM amplitude unit in signal units."""
    E = scheme.symbol_energy
    return [k.unit * math.sqrt(b * E) for k, b in zip(scheme.kinds, scheme.beta)]


def _draw_indices(scheme: HierScheme, n: int, rng) -> list:
    """Per layer, per axis level indices (None for an unused axis)."""
    out = []
    for k in scheme.kinds:
        m = k.axis_order
        out.append([rng.integers(0, m, n) if axis in k.axes else None for axis in (0, 1)])
    return out


def _symbol_class(scheme: HierScheme, idx) -> tuple[np.ndarray, int]:
    """Index of each transmitted symbol in in-phase-major pattern order, and
    the number of distinct symbols."""
    p, sizes = [0, 0], [1, 1]
    for k, layer in zip(scheme.kinds, idx):
        m = k.axis_order
        for axis in k.axes:
            p[axis] = p[axis] * m + layer[axis]
            sizes[axis] *= m
    return p[0] * sizes[1] + p[1], sizes[0] * sizes[1]


def _modulate(scheme: HierScheme, idx, amps) -> tuple[np.ndarray, np.ndarray]:
    """In-phase and quadrature components of the superimposed symbols.

    ``amps`` entries may be scalars or per-symbol arrays.
    """
    n = next(j for layer in idx for j in layer if j is not None).size
    x = [np.zeros(n), np.zeros(n)]
    for k, layer, a in zip(scheme.kinds, idx, amps):
        m = k.axis_order
        for axis in (0, 1):
            if layer[axis] is not None:
                x[axis] += (2 * layer[axis] - (m - 1)) * a
    return x[0], x[1]


def _decode_prefix(scheme: HierScheme, y, gain, idx, amps, present=None) -> np.ndarray:
    """Number of leading layers decoded correctly for every symbol.

    ``gain`` is the power gain per symbol (known to the receiver); a zero
    gain means nothing was received.  ``present`` optionally caps the
    number of layers carried by each symbol.
    """
    yi, yq = y
    root = np.sqrt(gain)
    res = [yi.copy(), yq.copy()]
    L = scheme.num_layers
    ok = np.ones(yi.size, dtype=bool)
    prefix = np.zeros(yi.size, dtype=np.int64)
    for l, (k, layer, a) in enumerate(zip(scheme.kinds, idx, amps)):
        m = k.axis_order
        scaled = root * a
        for axis in (0, 1):
            if layer[axis] is None:
                continue
            r = res[axis]
            decision = np.zeros(r.size, dtype=np.int64)
            for t in range(m - 1):
                decision += r > (2 * t + 2 - m) * scaled
            ok &= decision == layer[axis]
            r -= (2 * layer[axis] - (m - 1)) * scaled
        ok &= gain > 0
        if present is not None:
            ok &= present > l
        prefix += ok
    return np.minimum(prefix, L)


def _noise(rng, n: int, n0: float):
    sd = math.sqrt(n0 / 2.0)
    return rng.standard_normal(n) * sd, rng.standard_normal(n) * sd


def _receive(rng, x, gain, n0):
    ni, nq = _noise(rng, x[0].size, n0)
    root = np.sqrt(gain)
    return root * x[0] + ni, root * x[1] + nq


# --- link level -----------------------------------------------------------

def simulate_link(scheme: HierScheme, gain: float, symbols: int, seed: int = 0) -> dict:
    """Point-to-point SIC decoding at a fixed gain.

    Returns ``cum_ser`` (prefix failure rates), ``cond_ser`` (per-layer
    failure rate among symbols whose lower layers were all correct) and
    ``cond_trials`` (how many symbols that was, per layer).
    """
    if symbols < 1:
        raise ConfigurationError("need at least one symbol")
    L = scheme.num_layers
    reached = np.zeros(L + 1, dtype=np.int64)  # reached[l]: prefix >= l
    done = 0
    chunk = 0
    amps = _amplitudes(scheme)
    while done < symbols:
        n = min(_CHUNK_SYMBOLS, symbols - done)
        rng = make_rng(seed, chunk)
        idx = _draw_indices(scheme, n, rng)
        x = _modulate(scheme, idx, amps)
        y = _receive(rng, x, np.full(n, gain), scheme.noise_psd)
        prefix = _decode_prefix(scheme, y, np.full(n, float(gain)), idx, amps)
        reached += np.bincount(prefix, minlength=L + 1)[::-1].cumsum()[::-1]
        done += n
        chunk += 1
    cum = 1.0 - reached[1:] / symbols
    trials = reached[:-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(trials > 0, (trials - reached[1:]) / np.maximum(trials, 1), np.nan)
    return {"cum_ser": cum, "cond_ser": cond, "cond_trials": trials}


# --- protocol level -------------------------------------------------------

def _sample_slot_gains(spec, rng, count: int) -> np.ndarray:
    if isinstance(spec, FixedGain):
        return np.full(count, spec.gain)
    return spec.sample(rng, count)


def _as_network(links) -> Network:
    if isinstance(links, Network):
        return links
    if isinstance(links, LinkTriple):
        if links.relayed:
            return Network((links.sd,), links.sr, (links.rd,))
        return Network((links.sd,))
    raise ConfigurationError("expected a Network or a LinkTriple")


def _relay_amplitudes(relay: HierScheme, decoded: np.ndarray, mode: str) -> list:
    base = _amplitudes(relay)
    if mode == LITERAL:
        return base
    beta = np.asarray(relay.beta)
    kept = np.cumsum(beta)[np.maximum(decoded - 1, 0)]  # power of decoded layers
    total = beta.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where((decoded > 0) & (kept > 0), np.sqrt(total / kept), 0.0)
    return [np.where(decoded > l, a * scale, 0.0) for l, a in enumerate(base)]


def _batch_se(per_slot: np.ndarray, pooled: np.ndarray, n_symbols: int) -> np.ndarray:
    """Standard error of a pooled rate: slot batch means, or binomial for one slot."""
    slots = per_slot.shape[0]
    if slots > 1:
        return per_slot.std(axis=0, ddof=1) / math.sqrt(slots)
    return np.sqrt(pooled * (1.0 - pooled) / n_symbols)


def simulate(
    config: SimConfig,
    source: HierScheme,
    relay: HierScheme | None,
    model: EedModel,
    links,
) -> SimReport:
    """Run the protocol over ``config.slots`` slots and tally every destination."""
    network = _as_network(links)
    L = source.num_layers
    if model.num_layers != L:
        raise ConfigurationError("model and scheme disagree on the number of layers")
    relayed = network.relayed and relay is not None
    if relayed and relay.num_layers != L:
        raise ConfigurationError("source and relay must carry the same layers")
    n0 = source.noise_psd if config.noise_psd is None else config.noise_psd
    N = network.size
    S = config.symbols_per_slot
    names = ["s-r"] if relayed else []
    names += [f"s-d{n}" for n in range(N)] + ([f"r-d{n}" for n in range(N)] if relayed else [])

    # per-slot tallies
    level_counts = np.zeros((config.slots, N, L + 1), dtype=np.int64)
    relay_counts = np.zeros((config.slots, N, L + 1), dtype=np.int64)
    link_reached = {name: np.zeros((config.slots, L + 1), dtype=np.int64) for name in names}
    G = min(_GROUPS, config.slots)

    src_amps = _amplitudes(source)
    for start in range(0, config.slots, _CHUNK_SLOTS):
        slots = min(_CHUNK_SLOTS, config.slots - start)
        rng = make_rng(config.seed, start // _CHUNK_SLOTS)
        n = slots * S
        slot_of = np.repeat(np.arange(slots), S)

        def gains(spec):
            return _sample_slot_gains(spec, rng, slots)[slot_of]

        g_sd = [gains(spec) for spec in network.sd]
        if relayed:
            g_sr = gains(network.sr)
            g_rd = [gains(spec) for spec in network.rd]

        def tally(name, prefix):
            hist = np.zeros((slots, L + 1), dtype=np.int64)
            np.add.at(hist, (slot_of, prefix), 1)
            link_reached[name][start:start + slots] = hist[:, ::-1].cumsum(axis=1)[:, ::-1]

        idx = _draw_indices(source, n, rng)
        x = _modulate(source, idx, src_amps)
        cls, X = _symbol_class(source, idx)
        if start == 0:
            path_counts = np.zeros((G, N, X, L + 1, L + 1), dtype=np.int64)
        group = (start + slot_of) * G // config.slots
        if relayed:
            k_r = _decode_prefix(source, _receive(rng, x, g_sr, n0), g_sr, idx, src_amps)
            tally("s-r", k_r)
            r_idx = _draw_indices(relay, n, rng)
            for l in range(L):  # decoded layers carry the source's symbols
                for axis in (0, 1):
                    if r_idx[l][axis] is not None:
                        r_idx[l][axis] = np.where(k_r > l, idx[l][axis], r_idx[l][axis])
            r_amps = _relay_amplitudes(relay, k_r, config.relay_mode)
            xr = _modulate(relay, r_idx, r_amps)
            present = None if config.relay_mode == LITERAL else k_r
        for d in range(N):
            k_sd = _decode_prefix(source, _receive(rng, x, g_sd[d], n0), g_sd[d], idx, src_amps)
            tally(f"s-d{d}", k_sd)
            if not config.use_direct:
                k_sd = np.zeros_like(k_sd)
            level = k_sd
            via_relay = np.zeros_like(k_sd)
            if relayed:
                y = _receive(rng, xr, g_rd[d], n0)
                k_rd = _decode_prefix(relay, y, g_rd[d], r_idx, r_amps, present)
                tally(f"r-d{d}", k_rd)
                via_relay = np.minimum(k_r, k_rd)
                np.add.at(relay_counts, (start + slot_of, d, via_relay), 1)
                level = np.maximum(level, via_relay)
            np.add.at(level_counts, (start + slot_of, d, level), 1)
            key = ((group * X + cls) * (L + 1) + k_sd) * (L + 1) + via_relay
            path_counts[:, d] += np.bincount(key, minlength=G * X * (L + 1) ** 2).reshape(
                G, X, L + 1, L + 1)

    return _report(config, model, level_counts, relay_counts if relayed else None, link_reached,
                   path_counts)


def _report(config, model, level_counts, relay_counts, link_reached, path_counts) -> SimReport:
    total = config.symbols
    S = config.symbols_per_slot
    events = level_counts.sum(axis=0) / total  # (N, L+1)
    slot_eed = (level_counts / S) @ model.levels  # (slots, N)
    eed = events @ model.levels
    eed_se = _batch_se(slot_eed, None, total) if config.slots > 1 else _binomial_eed_se(events, model, total)

    def fail_rates(counts):
        # fail of prefix l+1: level < l+1
        cum = np.cumsum(counts, axis=-1)[..., :-1]
        return cum

    e2e_slot = fail_rates(level_counts) / S
    e2e = fail_rates(level_counts.sum(axis=0)) / total
    e2e_se = _batch_se(e2e_slot, e2e, total)
    relay_fail = None
    if relay_counts is not None:
        relay_fail = fail_rates(relay_counts.sum(axis=0)) / total

    cum_ser, cum_se, cond_ser, cond_trials = {}, {}, {}, {}
    for name, reached in link_reached.items():
        pooled = reached.sum(axis=0)
        cum = 1.0 - pooled[1:] / total
        cum_ser[name] = cum
        cum_se[name] = _batch_se(1.0 - reached[:, 1:] / S, cum, total)
        trials = pooled[:-1]
        with np.errstate(invalid="ignore", divide="ignore"):
            cond_ser[name] = np.where(trials > 0, (trials - pooled[1:]) / np.maximum(trials, 1), np.nan)
        cond_trials[name] = trials
    return SimReport(
        events, eed, np.asarray(eed_se), e2e, e2e_se, relay_fail,
        cum_ser, cum_se, cond_ser, cond_trials, total, config.slots, path_counts,
    )


def _binomial_eed_se(events: np.ndarray, model: EedModel, total: int) -> np.ndarray:
    lv = model.levels
    mean = events @ lv
    var = events @ lv**2 - mean**2
    return np.sqrt(np.maximum(var, 0.0) / total)


@dataclass(frozen=True)
class FactorizationReport:
    """Direct and relayed path failures against their independence given the
    transmitted symbol, per destination and prefix length.

    ``empirical[n, l]``: rate at which both paths miss prefix ``l + 1``.
    ``predicted[n, l]``: the same rate rebuilt from the per-symbol path
    failure rates as if the paths were conditionally independent.
    ``combined_stderr`` comes from the spread of the deviation over slot
    groups.  ``product_predicted`` is the product formula fed with the
    marginal per-link rates, kept as a diagnostic: it ignores that all
    links carry the same symbol and need not match ``report.e2e_fail``.
    """

    empirical: np.ndarray
    predicted: np.ndarray
    combined_stderr: np.ndarray
    max_abs_deviation: float
    max_z: float
    product_predicted: np.ndarray
    report: SimReport


def _path_rates(counts: np.ndarray):
    """Both-fail rate and its conditional-independence prediction.

    ``counts``: (..., X, L+1, L+1) tallies of (direct prefix, relayed prefix).
    """
    L = counts.shape[-1] - 1
    n_x = counts.sum(axis=(-2, -1))
    total = n_x.sum(axis=-1)
    # cum[a, b] = symbols with direct < a+1 and relayed < b+1
    cum = counts.cumsum(axis=-2).cumsum(axis=-1)
    idx = np.arange(L)
    both = cum[..., idx, idx]  # (..., X, L)
    direct = cum[..., idx, L]
    via = cum[..., L, idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        pred_x = np.where(n_x[..., None] > 0, direct * via / np.maximum(n_x, 1)[..., None], 0.0)
    return both.sum(axis=-2) / total[..., None], pred_x.sum(axis=-2) / total[..., None]


def validate_factorization(
    config: SimConfig,
    source: HierScheme,
    relay: HierScheme | None,
    model: EedModel,
    links,
) -> FactorizationReport:
    """Simulate and test that, given the source symbol, the direct and the
    relayed path fail independently."""
    rep = simulate(config, source, relay, model, links)
    network = _as_network(links)
    counts = rep.path_counts
    emp, pred = _path_rates(counts.sum(axis=0))
    G = counts.shape[0]
    if G > 1:
        e_g, p_g = _path_rates(counts)
        se = (e_g - p_g).std(axis=0, ddof=1) / math.sqrt(G)
    else:
        se = np.sqrt(emp * (1.0 - emp) / rep.symbols)
    dev = np.abs(emp - pred)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, np.where(dev > 1e-12, np.inf, 0.0))

    product = np.empty_like(emp)
    for d in range(network.size):
        a = rep.link_cum_ser[f"s-d{d}"] if config.use_direct else np.ones(emp.shape[1])
        if f"r-d{d}" in rep.link_cum_ser:
            b, c = rep.link_cum_ser["s-r"], rep.link_cum_ser[f"r-d{d}"]
            a = a * (1.0 - (1.0 - b) * (1.0 - c))
        product[d] = a
    return FactorizationReport(emp, pred, se, float(dev.max()), float(z.max()), product, rep)

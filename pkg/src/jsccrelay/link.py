"""Per-link SIC cascades, end-to-end SER over the direct and relayed paths,
and the distribution of the reconstruction level at a destination.

Two couplings of the links are available.  ``"product"`` combines the
symbol-averaged link SERs as ``p_sd * (1 - (1 - p_sr)(1 - p_rd))``.  That
treats the three links as independent, but the direct link and the relay
receive the same source symbol, and a hierarchical symbol's error
probability depends on which symbol it is (inner points are harder).
``"symbol"`` (the default) conditions on the transmitted symbol, where the
links really are independent: the relay's decoded prefix ``k`` is
forwarded together with fresh levels for the layers above ``k``, and the
destination keeps the longer of the direct and relayed prefixes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkFading, LinkTriple, sample_gains
from .errors import ConfigurationError, DomainError
from .hiermod import HierScheme, LayerSerProfile, axis_prefix_ser, cumulative_ser, prefix_averaging

__all__ = [
    "LinkErrorProfile",
    "E2eEventDist",
    "Integrator",
    "cumulative_link_ser",
    "e2e_ser",
    "event_distribution",
    "link_cumulative_ser",
    "link_symbol_ser_mean",
    "symbol_e2e_ser",
    "batch_link_ser",
    "combine_links",
    "e2e_ser_batches",
    "expected_e2e_ser",
]

_TOL = 1e-12
COUPLINGS = ("symbol", "product")


@dataclass(frozen=True)
class LinkErrorProfile:
    """``cum_ser[l]``: probability that layers 1..l+1 are not all decoded."""

    cum_ser: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.cum_ser, dtype=float)
        if np.any(arr < -_TOL) or np.any(arr > 1 + _TOL):
            raise DomainError(f"cumulative SERs must lie in [0, 1]: {arr}")
        if np.any(np.diff(arr) < -_TOL):
            raise DomainError(f"cumulative SERs must be nondecreasing: {arr}")
        object.__setattr__(self, "cum_ser", arr)

    @property
    def num_layers(self) -> int:
        return len(self.cum_ser)


@dataclass(frozen=True)
class E2eEventDist:
    """``probs[l]``: probability that exactly layers 1..l are reconstructed."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if np.any(arr < -_TOL):
            raise DomainError(f"event probabilities must be nonnegative: {arr}")
        if abs(arr.sum() - 1.0) > _TOL:
            raise DomainError(f"event probabilities sum to {arr.sum()}, not 1")
        object.__setattr__(self, "probs", arr)


@dataclass(frozen=True)
class Integrator:
    """Monte Carlo settings for averaging over channel draws.

    The draws are split into ``batches`` consecutive batches.  Within a
    batch every link is averaged separately and the link averages are then
    combined; since the gains of different links are independent and the
    E2E SER is affine in each link, every batch gives an unbiased estimate,
    and their spread gives the standard error.
    """

    draws: int = 200_000
    seed: int = 0
    batches: int = 32

    def __post_init__(self):
        if self.draws < 1:
            raise ConfigurationError("the integrator needs at least one draw")
        if self.batches < 1:
            raise ConfigurationError("the integrator needs at least one batch")

    def slices(self) -> list[slice]:
        edges = np.linspace(0, self.draws, min(self.batches, self.draws) + 1).astype(int)
        return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def cumulative_link_ser(profile: LayerSerProfile) -> LinkErrorProfile:
    """Chain conditional layer SERs into "up to layer l" SERs.

    The SER of prefix l is the probability that the first failing layer is
    at or below l: sum over p <= l of (prod_{k<p} (1 - q_k)) * q_p.
    """
    q = profile.cond_ser
    survive = 1.0
    total = 0.0
    out = np.empty(len(q))
    for l, ql in enumerate(q):
        total += survive * ql
        survive *= 1.0 - ql
        out[l] = min(total, 1.0)
    return LinkErrorProfile(out)


def _cum(p) -> np.ndarray:
    return p.cum_ser if isinstance(p, LinkErrorProfile) else np.asarray(p, dtype=float)


def e2e_ser(direct, sr=None, rd=None) -> np.ndarray:
    """Probability that neither path delivers layers 1..l, for every l.

    The relayed path delivers a prefix only when both of its hops do.
    Without relay profiles the direct link alone decides.
    """
    p_sd = _cum(direct)
    if sr is None and rd is None:
        return p_sd.copy()
    if sr is None or rd is None:
        raise ConfigurationError("both relay hops are needed")
    p_sr, p_rd = _cum(sr), _cum(rd)
    if not (p_sd.shape[-1] == p_sr.shape[-1] == p_rd.shape[-1]):
        raise ConfigurationError("link profiles disagree on the number of layers")
    return p_sd * (1.0 - (1.0 - p_sr) * (1.0 - p_rd))


def event_distribution(e2e) -> E2eEventDist:
    """Reconstruction-level probabilities from the cumulative E2E SERs."""
    p = np.asarray(e2e, dtype=float)
    if np.any(p < -_TOL) or np.any(p > 1 + _TOL):
        raise DomainError(f"E2E SERs must lie in [0, 1]: {p}")
    if np.any(np.diff(p) < -_TOL):
        raise DomainError(f"E2E SERs must be nondecreasing in the layer index: {p}")
    return E2eEventDist(np.diff(np.concatenate([[0.0], p, [1.0]])))


def link_cumulative_ser(h, scheme: HierScheme, sic: str = "exact") -> np.ndarray:
    """Cumulative SERs for an array of gains, shape ``h.shape + (L,)``.

    A gain of exactly zero is an absent link: nothing arrives, so no layer
    can pass its CRC and every prefix is lost.
    """
    h = np.asarray(h, dtype=float)
    cum = cumulative_ser(scheme.kinds, np.array(scheme.beta), scheme.snr(h), sic)
    return np.where((h == 0)[..., None], 1.0, cum)


def link_symbol_ser_mean(h, scheme: HierScheme) -> np.ndarray:
    """Per-symbol prefix SERs averaged over the gains ``h``, shape ``(X, L)``.

    Exact SIC; a zero gain is an absent link as in :func:`link_cumulative_ser`.
    The in-phase and quadrature successes share the gain, so the joint
    mean is formed per layer as one ``(P_I, n) @ (n, P_Q)`` product.
    """
    h = np.asarray(h, dtype=float).ravel()
    ei, eq = axis_prefix_ser(scheme.kinds, np.array(scheme.beta), scheme.snr(h))
    live = (h > 0)[:, None, None]
    ok_i, ok_q = np.where(live, 1.0 - ei, 0.0), 1.0 - eq
    joint = np.einsum("npl,nql->lpq", ok_i, ok_q, optimize=True) / max(h.size, 1)
    return 1.0 - np.moveaxis(joint.reshape(joint.shape[0], -1), 0, -1)


def symbol_e2e_ser(sd, sr, rd, averaging) -> np.ndarray:
    """E2E cumulative SERs with the links coupled through the transmitted symbol.

    ``sd``, ``sr``: per-symbol prefix SERs of the source symbol on the
    direct and relay links, ``rd``: those of the relay's symbol on the
    relay-destination link, each ``(..., X, L)``; ``averaging`` is
    :func:`jsccrelay.hiermod.prefix_averaging`.  Given the symbol the
    direct path fails independently of the relayed one, and the relayed
    path delivers prefix ``l`` when the relay decoded some ``k >= l``
    layers and the destination decodes ``l`` layers of what it forwards.
    The inputs may be channel averages when the three gains are
    independent, since the result is affine in each link.
    """
    sd, sr, rd = (np.asarray(a, dtype=float) for a in (sd, sr, rd))
    L = sd.shape[-1]
    ok_sr = 1.0 - sr
    # decoded[..., k-1]: relay decoded exactly layers 1..k
    decoded = ok_sr - np.concatenate([ok_sr[..., 1:], np.zeros(ok_sr.shape[:-1] + (1,))], axis=-1)
    ok_rd = np.moveaxis(1.0 - rd, -2, 0)  # (X, ..., L)
    X = ok_rd.shape[0]
    flat = ok_rd.reshape(X, -1)
    relay_ok = 0.0
    for k in range(1, L + 1):
        fwd = (averaging[k - 1] @ flat).reshape(ok_rd.shape)
        fwd[..., k:] = 0.0  # prefixes longer than k cannot get through
        relay_ok = relay_ok + np.moveaxis(decoded[..., k - 1], -1, 0)[..., None] * fwd
    fail = np.moveaxis(sd, -2, 0) * (1.0 - relay_ok)
    return fail.mean(axis=0).clip(0.0, 1.0)


def _draws(spec: LinkFading, name: str, integrator: Integrator) -> np.ndarray:
    return sample_gains({name: spec}, integrator.seed, integrator.draws).link(name)


def check_coupling(coupling: str, sic: str) -> None:
    if coupling not in COUPLINGS:
        raise ConfigurationError(f"unknown link coupling {coupling!r}")
    if coupling == "symbol" and sic != "exact":
        raise ConfigurationError("symbol coupling needs exact SIC")


def batch_link_ser(h, scheme: HierScheme, integrator: Integrator, sic: str = "exact", per_symbol: bool = False):
    """Per-batch channel averages of a link's prefix SERs.

    Returns an array ``(batches, L)``, or with ``per_symbol`` the
    per-symbol ``(batches, X, L)`` means for :func:`symbol_e2e_ser`.
    """
    h = np.asarray(h, dtype=float)
    if per_symbol:
        return np.stack([link_symbol_ser_mean(h[sl], scheme) for sl in integrator.slices()])
    return np.stack([link_cumulative_ser(h[sl], scheme, sic).mean(axis=0) for sl in integrator.slices()])


def combine_links(sd, sr=None, rd=None, coupling: str = "symbol", averaging=None) -> np.ndarray:
    """E2E prefix SERs from (averaged) link SERs of either coupling.

    Without relay links the direct link decides.
    """
    if sr is None or rd is None:
        return sd
    if coupling == "symbol":
        return symbol_e2e_ser(sd, sr, rd, averaging)
    return e2e_ser(sd, sr, rd)


def e2e_ser_batches(
    source: HierScheme,
    relay: HierScheme | None,
    links: LinkTriple,
    integrator: Integrator,
    names=("s-d", "s-r", "r-d"),
    sic: str = "exact",
    coupling: str = "symbol",
) -> np.ndarray:
    """Per-batch cumulative E2E SERs, shape ``(batches, L)``."""
    check_coupling(coupling, sic)
    h_sd = _draws(links.sd, names[0], integrator)
    if relay is None or not links.relayed:
        return batch_link_ser(h_sd, source, integrator, sic)
    if relay.kinds != source.kinds:
        raise ConfigurationError("source and relay must carry the same layers")
    per_symbol = coupling == "symbol"
    sd = batch_link_ser(h_sd, source, integrator, sic, per_symbol)
    sr = batch_link_ser(_draws(links.sr, names[1], integrator), source, integrator, sic, per_symbol)
    rd = batch_link_ser(_draws(links.rd, names[2], integrator), relay, integrator, sic, per_symbol)
    avg = prefix_averaging(source.kinds) if per_symbol else None
    return combine_links(sd, sr, rd, coupling, avg)


def expected_e2e_ser(
    source: HierScheme,
    relay: HierScheme | None,
    links: LinkTriple,
    layer: int,
    integrator: Integrator = Integrator(),
    sic: str = "exact",
    coupling: str = "symbol",
) -> tuple[float, float]:
    """Channel-averaged E2E SER of layers 1..``layer`` with its standard error."""
    if not 1 <= layer <= source.num_layers:
        raise ConfigurationError(f"layer must be in 1..{source.num_layers}")
    samples = e2e_ser_batches(source, relay, links, integrator, sic=sic, coupling=coupling)[:, layer - 1]
    n = len(samples)
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(samples.mean()), se

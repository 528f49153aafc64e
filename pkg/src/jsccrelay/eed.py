"""End-to-end distortion of an L-resolution Gaussian source."""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .channel import LinkTriple, Network, sample_gains
from .errors import ConfigurationError
from .hiermod import HierScheme
from .hiermod import prefix_averaging
from .link import E2eEventDist, Integrator, batch_link_ser, check_coupling, combine_links, e2e_ser_batches

__all__ = [
    "WORST",
    "EedModel",
    "NetworkEed",
    "instantaneous_eed",
    "eed_from_e2e",
    "expected_eed",
    "network_eed",
    "weighted_objective",
]

WORST = "worst"


@dataclass(frozen=True)
class EedModel:
    """Source variance and the distortion left after decoding layers 1..l.

    ``dq`` defaults to the Gaussian rate-distortion values
    ``2 ** (-2 * (R_1 + ... + R_l))``.
    """

    rates: tuple[int, ...]
    sigma2: float = 1.0
    dq: tuple[float, ...] | None = None

    def __post_init__(self):
        rates = tuple(int(r) for r in self.rates)
        if not rates or any(r <= 0 for r in rates):
            raise ConfigurationError(f"layer rates must be positive integers: {self.rates}")
        object.__setattr__(self, "rates", rates)
        dq = self.dq
        if dq is None:
            dq = tuple(2.0 ** (-2 * total) for total in np.cumsum(rates))
        dq = tuple(float(d) for d in dq)
        if len(dq) != len(rates):
            raise ConfigurationError("one quantizer distortion per layer is required")
        object.__setattr__(self, "dq", dq)
        chain = (self.sigma2,) + dq
        if not dq[-1] > 0 or any(a <= b for a, b in zip(chain, chain[1:])):
            raise ConfigurationError(
                f"need 0 < D_L < ... < D_1 < sigma2, got sigma2={self.sigma2}, dq={dq}"
            )

    @classmethod
    def for_scheme(cls, scheme: HierScheme, sigma2: float = 1.0) -> "EedModel":
        return cls(scheme.rates, sigma2)

    @property
    def num_layers(self) -> int:
        return len(self.rates)

    @property
    def floor(self) -> float:
        return self.dq[-1]

    @property
    def levels(self) -> np.ndarray:
        """Distortion for reconstruction levels 0..L."""
        return np.array((self.sigma2,) + self.dq)


def instantaneous_eed(events: E2eEventDist, model: EedModel) -> float:
    probs = events.probs
    if len(probs) != model.num_layers + 1:
        raise ConfigurationError("event distribution does not match the model's layers")
    return float(np.dot(model.levels, probs))


def eed_from_e2e(e2e, model: EedModel) -> np.ndarray:
    """Vectorized EED from cumulative E2E SERs of shape ``(..., L)``."""
    p = np.asarray(e2e, dtype=float)
    d = np.asarray(model.dq)
    out = model.sigma2 * p[..., 0] + d[-1] * (1.0 - p[..., -1])
    if model.num_layers > 1:
        out = out + np.sum(d[:-1] * (p[..., 1:] - p[..., :-1]), axis=-1)
    return out


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.shape[0]
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(x.mean()), se


def expected_eed(
    source: HierScheme,
    relay: HierScheme | None,
    links: LinkTriple,
    model: EedModel,
    integrator: Integrator = Integrator(),
    sic: str = "exact",
    coupling: str = "symbol",
) -> tuple[float, float]:
    """Channel-averaged EED at one destination and its Monte Carlo standard error."""
    p = e2e_ser_batches(source, relay, links, integrator, sic=sic, coupling=coupling)
    return _mean_se(eed_from_e2e(p, model))


@dataclass(frozen=True)
class NetworkEed:
    """Per-destination expected EED estimates over shared channel draws."""

    mean: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray  # (batches, N) per-batch estimates

    def objective(self, weights) -> tuple[float, float]:
        """Weighted (or worst-user) objective and its standard error."""
        if isinstance(weights, str):
            worst = weighted_objective(self.mean, weights)
            n = int(np.argmax(self.mean))
            return worst, float(self.stderr[n])
        w = _check_weights(weights, len(self.mean))
        return _mean_se(self.samples @ w)


def network_eed(
    source: HierScheme,
    relay: HierScheme | None,
    network: Network,
    model: EedModel,
    integrator: Integrator = Integrator(),
    sic: str = "exact",
    coupling: str = "symbol",
) -> NetworkEed:
    """Expected EED of every destination; the relay hop draws are shared by all."""
    check_coupling(coupling, sic)
    relayed = network.relayed and relay is not None
    if relayed and relay.kinds != source.kinds:
        raise ConfigurationError("source and relay must carry the same layers")
    specs = network.link_specs() if relayed else network.without_relay().link_specs()
    gains = sample_gains(specs, integrator.seed, integrator.draws)
    per_symbol = relayed and coupling == "symbol"

    def means(name, scheme):
        return batch_link_ser(gains.link(name), scheme, integrator, sic, per_symbol)

    sr = means("s-r", source) if relayed else None
    avg = prefix_averaging(source.kinds) if per_symbol else None
    cols = []
    for n in range(network.size):
        rd = means(f"r-d{n}", relay) if relayed else None
        p = combine_links(means(f"s-d{n}", source), sr, rd, coupling, avg)
        cols.append(eed_from_e2e(p, model))
    samples = np.stack(cols, axis=1)
    n = samples.shape[0]
    se = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(samples.shape[1])
    return NetworkEed(samples.mean(axis=0), se, samples)


def _check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ConfigurationError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"weights must lie in [0, 1] and sum to 1: {w}")
    return w


def weighted_objective(per_user_eeds: Sequence[float], weights) -> float:
    """Weighted sum of per-user EEDs, or the largest one for ``weights=WORST``."""
    eeds = np.asarray(per_user_eeds, dtype=float)
    if isinstance(weights, str):
        if weights != WORST:
            raise ConfigurationError(f"unknown objective selector {weights!r}")
        return float(eeds.max())
    return float(np.dot(_check_weights(weights, len(eeds)), eeds))

"""Nakagami fading statistics, path-loss geometry and seeded gain sampling.

Channel power gains follow a Nakagami distribution with shape ``rho`` and
mean ``mean_gain``; the power gain itself is Gamma(rho, mean_gain / rho).

Random streams come from numpy's counter-based Philox bit generator.  Every
link gets its own stream keyed by (seed, crc32(link name)), so adding a link
to a network never perturbs the draws of the links already there.  This is
what lets the optimizer reuse identical draws (common random numbers)
across candidate power allocations.
"""
from __future__ import annotations

import math
import zlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError

__all__ = [
    "FadingSpec",
    "FixedGain",
    "Geometry",
    "ChannelDraw",
    "GainSamples",
    "LinkTriple",
    "Network",
    "nakagami_pdf",
    "nakagami_cdf",
    "sample_gains",
    "mean_gain_from_geometry",
    "make_rng",
]

# Integer shapes up to this value are sampled as sums of squared Gaussian
# pairs; anything larger goes through the gamma sampler.
_MAX_PAIR_SHAPE = 16


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the substream ``key`` of a 64-bit ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise ConfigurationError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def link_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


@dataclass(frozen=True)
class FadingSpec:
    """Nakagami-``rho`` block fading with average power gain ``mean_gain``."""

    rho: float
    mean_gain: float

    def __post_init__(self):
        if not (self.rho > 0):
            raise ConfigurationError(f"Nakagami shape must be positive, got {self.rho}")
        if not (self.mean_gain > 0) or not math.isfinite(self.mean_gain):
            raise ConfigurationError(f"mean gain must be positive and finite, got {self.mean_gain}")

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        scale = self.mean_gain / self.rho
        if math.isinf(self.rho):
            return np.full(count, self.mean_gain)
        if float(self.rho).is_integer() and self.rho <= _MAX_PAIR_SHAPE:
            k = int(self.rho)
            # each Gaussian pair with per-component variance 1/2 is Exp(1)
            xy = rng.standard_normal((2 * k, count)) * math.sqrt(0.5)
            return np.sum(xy * xy, axis=0) * scale
        return rng.gamma(self.rho, scale, size=count)


@dataclass(frozen=True)
class FixedGain:
    """Deterministic power gain; ``gain == 0`` models an absent link."""

    gain: float

    def __post_init__(self):
        if not (self.gain >= 0) or not math.isfinite(self.gain):
            raise ConfigurationError(f"fixed gain must be finite and >= 0, got {self.gain}")

    @property
    def mean_gain(self) -> float:
        return self.gain

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.full(count, float(self.gain))


LinkFading = Union[FadingSpec, FixedGain]


def _check_gain_arg(h) -> np.ndarray:
    arr = np.asarray(h, dtype=float)
    if np.any(np.isnan(arr)) or np.any(~np.isfinite(arr)):
        raise DomainError("channel gain must be finite")
    if np.any(arr < 0):
        raise DomainError("channel gain must be nonnegative")
    return arr


def _as_output(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def nakagami_pdf(spec: FadingSpec, h):
    """Density of the instantaneous power gain at ``h`` (scalar or array)."""
    x = _check_gain_arg(h)
    rho, hbar = spec.rho, spec.mean_gain
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = (
            rho * math.log(rho / hbar)
            + (rho - 1.0) * np.log(x)
            - special.gammaln(rho)
            - rho * x / hbar
        )
        out = np.exp(logf)
    # (rho - 1) * log(0) is nan for rho == 1
    if rho == 1.0:
        out = np.where(x == 0, 1.0 / hbar, out)
    return _as_output(out, h)


def nakagami_cdf(spec: FadingSpec, h):
    """Probability that the power gain does not exceed ``h``."""
    x = _check_gain_arg(h)
    out = special.gammainc(spec.rho, spec.rho * x / spec.mean_gain)
    return _as_output(out, h)


@dataclass(frozen=True)
class ChannelDraw:
    """Instantaneous gains of every link for one slot."""

    gains: Mapping[str, float]


@dataclass(frozen=True)
class GainSamples(Sequence):
    """Columnar store of ``count`` slot draws; indexing yields ChannelDraw."""

    columns: Mapping[str, np.ndarray]
    count: int

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self.count))]
        if i < 0:
            i += self.count
        if not 0 <= i < self.count:
            raise IndexError(i)
        return ChannelDraw({name: float(col[i]) for name, col in self.columns.items()})

    def __iter__(self):
        for i in range(self.count):
            yield self[i]

    def link(self, name: str) -> np.ndarray:
        return self.columns[name]


def sample_gains(specs: Mapping[str, LinkFading], seed: int, count: int) -> GainSamples:
    """Draw ``count`` independent slots of gains for every link in ``specs``."""
    if count < 0:
        raise ConfigurationError("count must be nonnegative")
    cols = {}
    for name, spec in specs.items():
        if count == 0:
            cols[name] = np.empty(0)
            continue
        cols[name] = spec.sample(make_rng(seed, link_key(name)), count)
    return GainSamples(cols, count)


@dataclass(frozen=True)
class Geometry:
    positions: Mapping[str, tuple[float, float]]
    pathloss_exponent: float = 3.0

    def __post_init__(self):
        if not self.pathloss_exponent >= 2:
            raise ConfigurationError(
                f"path-loss exponent must be >= 2, got {self.pathloss_exponent}"
            )
        pts = list(self.positions.items())
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if math.dist(pts[a][1], pts[b][1]) == 0:
                    raise ConfigurationError(f"nodes {pts[a][0]!r} and {pts[b][0]!r} coincide")

    def distance(self, i: str, j: str) -> float:
        return math.dist(self.positions[i], self.positions[j])


def mean_gain_from_geometry(geo: Geometry, i: str, j: str) -> float:
    """Large-scale mean power gain ``1 / d_ij ** alpha``."""
    if i == j:
        raise DomainError("a link needs two distinct nodes")
    d = geo.distance(i, j)
    if d == 0:
        raise DomainError(f"nodes {i!r} and {j!r} coincide")
    return d ** (-geo.pathloss_exponent)


@dataclass(frozen=True)
class LinkTriple:
    """Fading of the three links seen by one destination.

    ``sr`` and ``rd`` are None when the relay is not used.
    """

    sd: LinkFading
    sr: LinkFading | None = None
    rd: LinkFading | None = None

    @property
    def relayed(self) -> bool:
        return self.sr is not None and self.rd is not None


@dataclass(frozen=True)
class Network:
    """Source, optional relay and ``N`` destinations, described by link fading."""

    sd: tuple[LinkFading, ...]
    sr: LinkFading | None = None
    rd: tuple[LinkFading, ...] | None = None
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.sd) < 1:
            raise ConfigurationError("a network needs at least one destination")
        if (self.sr is None) != (self.rd is None):
            raise ConfigurationError("relay links must be given together (sr and rd)")
        if self.rd is not None and len(self.rd) != len(self.sd):
            raise ConfigurationError("one relay-destination link per destination is required")

    @property
    def size(self) -> int:
        return len(self.sd)

    @property
    def relayed(self) -> bool:
        return self.sr is not None

    def user(self, n: int) -> LinkTriple:
        if self.relayed:
            return LinkTriple(self.sd[n], self.sr, self.rd[n])
        return LinkTriple(self.sd[n])

    def without_relay(self) -> "Network":
        return Network(self.sd, None, None, self.names)

    def link_specs(self) -> dict[str, LinkFading]:
        """Link name -> fading, in a fixed order (sr first)."""
        out: dict[str, LinkFading] = {}
        if self.sr is not None:
            out["s-r"] = self.sr
        for n, spec in enumerate(self.sd):
            out[f"s-d{n}"] = spec
        if self.rd is not None:
            for n, spec in enumerate(self.rd):
                out[f"r-d{n}"] = spec
        return out

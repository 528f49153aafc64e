"""Superimposed (hierarchical) constellations and their per-layer SER under SIC.

Every layer is a square QAM (or BPSK) constellation scaled to energy
``beta_l * E``.  Square QAM splits into two independent PAM axes; BPSK
lives on the in-phase axis only, so stacked BPSK layers form a nested PAM
on that axis.  Per-axis PAM levels of a layer with amplitude unit ``a`` are
``(2j - (m - 1)) * a`` for ``j = 0..m-1``.

The receiver knows the gain (coherent detection) and decodes the layers in
order.  Decoding layer ``l`` subtracts the already decoded layers and slices
the residual with the PAM thresholds of layer ``l`` alone; the layers above
it act as interference.  Given the transmitted levels on an axis, "layers
1..l all correct" is the event that the noise sample falls inside the
intersection of one interval per layer, so its probability is a difference
of two normal CDF values.  Averaging over the equiprobable level patterns
and multiplying the two axes gives exact prefix success probabilities.

The ``sic="independent"`` variant instead scores each layer against its own
interval only and chains the layers as if their errors were independent.
For two QPSK layers that reproduces the textbook closed forms
(:func:`qpsk_qpsk_base_ser`, :func:`qpsk_qpsk_enh_ser_cond`); it ignores the
fact that a correct lower-layer decision already constrains the noise.
"""
from __future__ import annotations

import enum
import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, DomainError

__all__ = [
    "Kind",
    "LayerModulation",
    "HierScheme",
    "LayerSerProfile",
    "q_function",
    "qpsk_qpsk_base_ser",
    "qpsk_qpsk_enh_ser_cond",
    "layer_ser_profile",
    "cumulative_ser",
    "axis_prefix_ser",
    "axis_patterns",
    "symbol_prefix_ser",
    "symbol_digits",
    "prefix_averaging",
    "conditional_from_cumulative",
]


class Kind(enum.Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"
    QAM16 = "QAM16"
    QAM64 = "QAM64"

    @property
    def bits(self) -> int:
        return _BITS[self]

    @property
    def axes(self) -> tuple[int, ...]:
        """Signal axes used: 0 is in-phase, 1 is quadrature."""
        return (0,) if self is Kind.BPSK else (0, 1)

    @property
    def axis_order(self) -> int:
        """Number of PAM levels per used axis."""
        return 2 if self is Kind.BPSK else int(round(math.sqrt(2**self.bits)))

    @property
    def unit(self) -> float:
        """Per-axis PAM amplitude unit for unit symbol energy."""
        if self is Kind.BPSK:
            return 1.0
        m = 2**self.bits
        return math.sqrt(3.0 / (2.0 * (m - 1)))

    @classmethod
    def parse(cls, name) -> "Kind":
        if isinstance(name, Kind):
            return name
        key = str(name).strip().upper().replace("-", "").replace("_", "")
        aliases = {"16QAM": "QAM16", "64QAM": "QAM64", "4QAM": "QPSK"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unsupported constellation {name!r}") from None


_BITS = {Kind.BPSK: 1, Kind.QPSK: 2, Kind.QAM16: 4, Kind.QAM64: 6}


@dataclass(frozen=True)
class LayerModulation:
    kind: Kind
    bits_per_symbol: int | None = None

    def __post_init__(self):
        kind = Kind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.bits_per_symbol is None:
            object.__setattr__(self, "bits_per_symbol", kind.bits)
        elif self.bits_per_symbol != kind.bits:
            raise ConfigurationError(
                f"{kind.value} carries {kind.bits} bits per symbol, not {self.bits_per_symbol}"
            )


def _layers(layers) -> tuple[LayerModulation, ...]:
    out = tuple(x if isinstance(x, LayerModulation) else LayerModulation(x) for x in layers)
    if not out:
        raise ConfigurationError("a scheme needs at least one layer")
    return out


@dataclass(frozen=True)
class HierScheme:
    """Layer constellations plus the power split used at one transmitter."""

    layers: tuple[LayerModulation, ...]
    beta: tuple[float, ...]
    symbol_energy: float = 1.0
    noise_psd: float = 1.0

    def __post_init__(self):
        layers = _layers(self.layers)
        beta = tuple(float(b) for b in self.beta)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "beta", beta)
        if len(beta) != len(layers):
            raise ConfigurationError(f"{len(layers)} layers but {len(beta)} power fractions")
        if any(not math.isfinite(b) or b < 0 for b in beta):
            raise ConfigurationError(f"power fractions must be finite and >= 0: {beta}")
        if sum(beta) > 1 + 1e-12:
            raise ConfigurationError(f"power fractions sum to {sum(beta)} > 1")
        if not (self.symbol_energy > 0 and self.noise_psd > 0):
            raise ConfigurationError("symbol energy and noise PSD must be positive")

    @classmethod
    def of(cls, kinds: Sequence, beta: Sequence[float], symbol_energy=1.0, noise_psd=1.0):
        return cls(_layers(kinds), tuple(beta), symbol_energy, noise_psd)

    @property
    def kinds(self) -> tuple[Kind, ...]:
        return tuple(layer.kind for layer in self.layers)

    @property
    def rates(self) -> tuple[int, ...]:
        return tuple(layer.bits_per_symbol for layer in self.layers)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def snr(self, h):
        """Received symbol SNR ``h * E / N0``."""
        return np.asarray(h, dtype=float) * (self.symbol_energy / self.noise_psd)

    def with_beta(self, beta: Sequence[float]) -> "HierScheme":
        return HierScheme(self.layers, tuple(beta), self.symbol_energy, self.noise_psd)


@dataclass(frozen=True)
class LayerSerProfile:
    """``cond_ser[l]``: SER of layer l+1 given layers 1..l decoded correctly."""

    cond_ser: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.cond_ser, dtype=float)
        if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
            raise DomainError(f"conditional SERs must lie in [0, 1]: {arr}")
        object.__setattr__(self, "cond_ser", arr)


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("Q-function argument is NaN")
    out = ndtr(-arr)
    return float(out) if np.ndim(x) == 0 else out


def _require_qpsk_pair(scheme: HierScheme):
    if scheme.kinds != (Kind.QPSK, Kind.QPSK):
        raise ConfigurationError(f"expected a QPSK/QPSK scheme, got {scheme.kinds}")


def qpsk_qpsk_base_ser(h: float, scheme: HierScheme) -> float:
    """Base-layer SER of two superimposed QPSK layers at gain ``h``.

    Written out per first-quadrant symbol s1..s4, each axis either adding
    or subtracting the enhancement amplitude from the base amplitude.
    """
    _require_qpsk_pair(scheme)
    E, N0 = scheme.symbol_energy, scheme.noise_psd
    e1, e2 = scheme.beta[0] * E, scheme.beta[1] * E
    k = math.sqrt(2.0 / N0)
    near = q_function(k * (math.sqrt(h * e1 / 2) - math.sqrt(h * e2 / 2)))
    far = q_function(k * (math.sqrt(h * e1 / 2) + math.sqrt(h * e2 / 2)))
    p_abscissa = {1: near, 3: near, 2: far, 4: far}
    p_ordinate = {1: far, 2: far, 3: near, 4: near}
    total = 0.0
    for q in (1, 2, 3, 4):
        total += 1 - (1 - p_abscissa[q]) * (1 - p_ordinate[q])
    return total / 4


def qpsk_qpsk_enh_ser_cond(h: float, scheme: HierScheme) -> float:
    """Enhancement-layer QPSK SER once the base layer is cancelled."""
    _require_qpsk_pair(scheme)
    q = q_function(math.sqrt(h * scheme.beta[1] * scheme.symbol_energy / scheme.noise_psd))
    return 2 * q - q * q


def _axis_patterns(kinds, axis):
    """Active layers on ``axis``, their PAM orders and all level patterns
    (first active layer most significant)."""
    active = [k for k in range(len(kinds)) if axis in kinds[k].axes]
    orders = [kinds[k].axis_order for k in active]
    return active, orders, list(itertools.product(*[range(m) for m in orders]))


def _axis_error_tables(kinds, amps, s, sic):
    """Per-axis error probabilities for every transmitted level pattern.

    ``amps``: tuple of per-layer amplitude arrays (broadcastable with ``s``).
    Returns two arrays of shape ``s.shape + (P, L)``, one per axis, with
    ``P`` the number of level patterns on that axis (1 for an unused
    axis).  In exact mode entry ``l`` is the probability that some layer
    <= l on this axis is decoded wrongly; in independent mode it is the
    error probability of layer ``l`` alone (0 for layers not on the axis).
    """
    L = len(kinds)
    shape = np.broadcast(s, *amps).shape
    tables = []
    for axis in (0, 1):
        active, orders, patterns = _axis_patterns(kinds, axis)
        err = np.zeros(shape + (len(patterns), L))
        for p, pattern in enumerate(patterns):
            levels = [(2 * j - (m - 1)) * amps[k] for j, m, k in zip(pattern, orders, active)]
            run_lo = np.full(shape, -np.inf)
            run_hi = np.full(shape, np.inf)
            bounds = {}
            for idx, k in enumerate(active):
                interference = sum(levels[idx + 1:], np.zeros(shape))
                j, m = pattern[idx], orders[idx]
                lo = np.full(shape, -np.inf) if j == 0 else s * (-amps[k] - interference)
                hi = np.full(shape, np.inf) if j == m - 1 else s * (amps[k] - interference)
                if sic == "exact":
                    run_lo = np.maximum(run_lo, lo)
                    run_hi = np.minimum(run_hi, hi)
                    bounds[k] = (run_lo, run_hi)
                else:
                    bounds[k] = (lo, hi)
            last = None
            for l in range(L):
                if l in bounds:
                    lo, hi = bounds[l]
                    e = np.where(hi > lo, ndtr(-hi) + ndtr(lo), 1.0)
                    last = e
                elif sic != "exact" or last is None:
                    continue
                else:
                    e = last
                err[..., p, l] = e
        tables.append(err)
    return tables


def _prepare(kinds, beta, snr, sic):
    if sic not in ("exact", "independent"):
        raise ConfigurationError(f"unknown SIC model {sic!r}")
    kinds = tuple(Kind.parse(k) for k in kinds)
    beta = np.asarray(beta, dtype=float)
    if beta.shape[-1] != len(kinds):
        raise ConfigurationError(f"beta has {beta.shape[-1]} entries for {len(kinds)} layers")
    if np.any(beta < 0):
        raise DomainError("power fractions must be nonnegative")
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0) or np.any(np.isnan(snr)):
        raise DomainError("SNR must be nonnegative")
    s = np.sqrt(2.0 * snr)
    amps = tuple(np.sqrt(beta[..., k]) * kinds[k].unit for k in range(len(kinds)))
    return _axis_error_tables(kinds, amps, s, sic)


def cumulative_ser(kinds, beta, snr, sic: str = "exact") -> np.ndarray:
    """SER of "layers 1..l" for every prefix, broadcast over ``beta`` and ``snr``.

    ``beta`` has shape ``(..., L)``; ``snr`` (``h E / N0``) broadcasts
    against ``beta[..., 0]``.  Returns shape ``broadcast + (L,)``.  The
    power fractions are not required to sum to one here.
    """
    ex, ey = (t.mean(axis=-2) for t in _prepare(kinds, beta, snr, sic))
    with np.errstate(divide="ignore"):
        if sic == "exact":
            log_ok = np.log1p(-ex) + np.log1p(-ey)
        else:
            log_ok = np.cumsum(np.log1p(-ex) + np.log1p(-ey), axis=-1)
    return -np.expm1(log_ok)


def axis_prefix_ser(kinds, beta, snr) -> tuple[np.ndarray, np.ndarray]:
    """Exact-SIC error probability of "layers 1..l" on each axis, per level pattern.

    Same broadcasting as :func:`cumulative_ser`; returns one array per axis
    of shape ``broadcast + (P, L)``, patterns ordered as in
    :func:`axis_patterns`.  Given the transmitted symbol and the gain the
    two axes are independent, so the symbol's prefix success is the
    product of the two axis successes.
    """
    return tuple(_prepare(kinds, beta, snr, "exact"))


def axis_patterns(kinds) -> tuple[np.ndarray, np.ndarray]:
    """Level index of every layer for each pattern on each axis, shape ``(P, L)``.

    Patterns are enumerated with the lowest active layer as the most
    significant digit; layers not carried on the axis hold -1.  An axis
    with no layer has a single empty pattern.
    """
    kinds = tuple(Kind.parse(k) for k in kinds)
    out = []
    for axis in (0, 1):
        active, _, patterns = _axis_patterns(kinds, axis)
        d = np.full((len(patterns), len(kinds)), -1)
        for p, pattern in enumerate(patterns):
            d[p, active] = pattern
        out.append(d)
    return tuple(out)


def symbol_prefix_ser(kinds, beta, snr) -> np.ndarray:
    """Exact-SIC SER of "layers 1..l" given the transmitted symbol.

    Returns shape ``broadcast + (X, L)`` with the symbols ordered as in
    :func:`symbol_digits`; the mean over symbols is :func:`cumulative_ser`.
    """
    ei, eq = axis_prefix_ser(kinds, beta, snr)
    ok = (1.0 - ei)[..., :, None, :] * (1.0 - eq)[..., None, :, :]
    return 1.0 - ok.reshape(ok.shape[:-3] + (-1, ok.shape[-1]))


def symbol_digits(kinds) -> np.ndarray:
    """Level index of every layer on both axes for each symbol, shape ``(X, L, 2)``.

    Symbols run over in-phase patterns (major) and quadrature patterns
    (minor), as in :func:`axis_patterns`; unused axes hold -1.
    """
    di, dq = axis_patterns(kinds)
    L = di.shape[1]
    out = np.empty((len(di), len(dq), L, 2), dtype=int)
    out[..., 0] = di[:, None, :]
    out[..., 1] = dq[None, :, :]
    return out.reshape(-1, L, 2)


def prefix_averaging(kinds) -> np.ndarray:
    """Matrices ``A[k-1]`` (``k = 1..L``) averaging over the symbols that agree
    with the row symbol on layers 1..k, shape ``(L, X, X)``.

    A relay that decoded only layers 1..k forwards those and fresh
    equiprobable levels above them; ``A[k-1] @ p`` averages a per-symbol
    quantity ``p`` over that forwarded-symbol distribution.
    """
    d = symbol_digits(kinds)
    X, L, _ = d.shape
    out = np.empty((L, X, X))
    for k in range(1, L + 1):
        same = np.all(d[:, None, :k] == d[None, :, :k], axis=(2, 3))
        out[k - 1] = same / same.sum(axis=1, keepdims=True)
    return out


def conditional_from_cumulative(cum: np.ndarray) -> np.ndarray:
    """Invert the SIC cascade: per-layer SER given all lower layers correct."""
    cum = np.asarray(cum, dtype=float)
    prev = np.concatenate([np.zeros(cum.shape[:-1] + (1,)), cum[..., :-1]], axis=-1)
    ok_prev = 1.0 - prev
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(ok_prev > 0, (cum - prev) / ok_prev, 1.0)
    return np.clip(q, 0.0, 1.0)


def layer_ser_profile(h: float, scheme: HierScheme, sic: str = "exact") -> LayerSerProfile:
    """Conditional per-layer SERs of ``scheme`` at instantaneous gain ``h``."""
    if not (h >= 0) or math.isinf(h):
        raise DomainError(f"gain must be finite and nonnegative, got {h}")
    cum = cumulative_ser(scheme.kinds, np.array(scheme.beta), scheme.snr(h), sic=sic)
    return LayerSerProfile(conditional_from_cumulative(cum))

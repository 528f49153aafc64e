"""Square-topology multicast scenario and its configuration file.

The source sits at (0, 0), the relay at the centre of a ``d x d`` square
and ``N`` destinations are placed uniformly in the square from a seed.
Transmit powers are set through a normalized reference SNR: the mean SNR a
receiver at distance ``d / sqrt(2)`` from a transmitter would see.  A link
of length ``d_ij`` then has mean SNR ``snr_ref * (d / sqrt(2) / d_ij) ** alpha``.
Source and relay use the same power.

Configuration is INI text::

    [scenario]
    side_length = 10
    pathloss_exponent = 3
    nakagami_shape = 2
    destinations = 10
    placement_seed = 1
    snr_db = -15, -5, 5, 15, 25
    metric = p1              ; p1, p2 or both
    schemes = relay-3L, direct-3L
    sigma2 = 1

    [optimizer]
    epsilon = 0.001
    max_iters = 100
    mc_draws = 20000
    report_draws = 200000
    seed = 0

    [scheme relay-3L]        ; optional, overrides or adds a scheme
    layers = BPSK, BPSK, QAM16
    relay = yes
"""
from __future__ import annotations

import configparser
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

from .channel import FadingSpec, Geometry, Network, make_rng, mean_gain_from_geometry
from .eed import EedModel
from .errors import ConfigurationError
from .hiermod import HierScheme, Kind

__all__ = [
    "ConfigParseError",
    "SchemeDef",
    "DEFAULT_SCHEMES",
    "Scenario",
    "build_scenario",
    "parse_scenario",
    "with_overrides",
]

P1, P2, BOTH = "p1", "p2", "both"


class ConfigParseError(ConfigurationError):
    """Malformed configuration text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class SchemeDef:
    name: str
    layers: tuple[Kind, ...]
    relay: bool

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(Kind.parse(k) for k in self.layers))
        if not self.layers:
            raise ConfigurationError(f"scheme {self.name!r} has no layers")

    @property
    def rates(self) -> tuple[int, ...]:
        return tuple(k.bits for k in self.layers)

    @property
    def num_layers(self) -> int:
        return len(self.layers)


_3L = (Kind.BPSK, Kind.BPSK, Kind.QAM16)
_2L = (Kind.QPSK, Kind.QAM16)
_MONO = (Kind.QAM64,)
DEFAULT_SCHEMES = {
    s.name: s
    for s in (
        SchemeDef("relay-3L", _3L, True),
        SchemeDef("direct-3L", _3L, False),
        SchemeDef("relay-2L", _2L, True),
        SchemeDef("direct-2L", _2L, False),
        SchemeDef("relay-mono", _MONO, True),
        SchemeDef("direct-mono", _MONO, False),
    )
}


@dataclass(frozen=True)
class Scenario:
    side_length: float = 10.0
    pathloss_exponent: float = 3.0
    nakagami_shape: float = 2.0
    destinations: int = 10
    placement_seed: int = 1
    snr_db: tuple[float, ...] = (-15.0, -5.0, 5.0, 15.0, 25.0)
    metric: str = P1
    schemes: tuple[SchemeDef, ...] = tuple(DEFAULT_SCHEMES.values())
    sigma2: float = 1.0
    noise_psd: float = 1.0
    epsilon: float = 1e-3
    max_iters: int = 100
    mc_draws: int = 20_000
    report_draws: int = 200_000
    seed: int = 0
    positions: dict = field(default=None, compare=False)

    def __post_init__(self):
        bad = []
        if not self.side_length > 0:
            bad.append("side_length")
        if not self.pathloss_exponent >= 2:
            bad.append("pathloss_exponent")
        if not self.nakagami_shape >= 0.5:
            bad.append("nakagami_shape")
        if self.destinations < 1:
            bad.append("destinations")
        if self.metric not in (P1, P2, BOTH):
            bad.append("metric")
        if not self.schemes:
            bad.append("schemes")
        if not self.sigma2 > 0:
            bad.append("sigma2")
        if not self.noise_psd > 0:
            bad.append("noise_psd")
        if not self.epsilon > 0:
            bad.append("epsilon")
        if self.max_iters < 1:
            bad.append("max_iters")
        if self.mc_draws < 2:
            bad.append("mc_draws")
        if self.report_draws < 2:
            bad.append("report_draws")
        if not 0 <= self.seed < 2**64 or not 0 <= self.placement_seed < 2**64:
            bad.append("seed")
        if not all(math.isfinite(s) for s in self.snr_db):
            bad.append("snr_db")
        if bad:
            raise ConfigurationError(f"invalid scenario fields: {', '.join(bad)}")
        if self.positions is None:
            object.__setattr__(self, "positions", self._place())

    def _place(self) -> dict:
        d = self.side_length
        rng = make_rng(self.placement_seed, 0)
        pts = rng.uniform(0.0, d, size=(self.destinations, 2))
        pos = {"s": (0.0, 0.0), "r": (d / 2, d / 2)}
        for n, (x, y) in enumerate(pts):
            pos[f"d{n}"] = (float(x), float(y))
        return pos

    @property
    def geometry(self) -> Geometry:
        return Geometry(self.positions, self.pathloss_exponent)

    @property
    def reference_distance(self) -> float:
        return self.side_length / math.sqrt(2.0)

    def normalized_mean_gain(self, i: str, j: str) -> float:
        """Mean gain relative to a link of the reference length."""
        return mean_gain_from_geometry(self.geometry, i, j) * self.reference_distance ** self.pathloss_exponent

    def transmit_energy(self, snr_db: float) -> float:
        """Symbol energy at source and relay for a normalized reference SNR."""
        return self.noise_psd * 10.0 ** (snr_db / 10.0)

    def link_mean_snr(self, i: str, j: str, snr_db: float) -> float:
        return self.transmit_energy(snr_db) * self.normalized_mean_gain(i, j) / self.noise_psd

    def network(self, relayed: bool = True) -> Network:
        rho = self.nakagami_shape

        def spec(i, j):
            return FadingSpec(rho, self.normalized_mean_gain(i, j))

        users = range(self.destinations)
        sd = tuple(spec("s", f"d{n}") for n in users)
        names = tuple(f"d{n}" for n in users)
        if not relayed:
            return Network(sd, names=names)
        return Network(sd, spec("s", "r"), tuple(spec("r", f"d{n}") for n in users), names)

    def model(self, scheme: SchemeDef) -> EedModel:
        return EedModel(scheme.rates, self.sigma2)

    def hier_scheme(self, scheme: SchemeDef, beta: Sequence[float], snr_db: float) -> HierScheme:
        return HierScheme.of(scheme.layers, beta, self.transmit_energy(snr_db), self.noise_psd)

    def metrics(self) -> tuple[str, ...]:
        return (P1, P2) if self.metric == BOTH else (self.metric,)

    def scheme(self, name: str) -> SchemeDef:
        for s in self.schemes:
            if s.name == name:
                return s
        raise ConfigurationError(f"unknown scheme {name!r}")


# --- configuration text ----------------------------------------------------

_SCENARIO_KEYS = {
    "side_length": float,
    "pathloss_exponent": float,
    "nakagami_shape": float,
    "destinations": int,
    "placement_seed": int,
    "sigma2": float,
    "noise_psd": float,
    "metric": str,
}
_OPTIMIZER_KEYS = {
    "epsilon": float,
    "max_iters": int,
    "mc_draws": int,
    "report_draws": int,
    "seed": int,
}


def _list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    """Best-effort line number of a section header or a key inside it."""
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return n
        elif current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key:
                return n
    return None


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigParseError("cannot parse configuration", line) from exc
    except configparser.Error as exc:
        raise ConfigParseError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from exc

    known = {"scenario", "optimizer"}
    for sec in cp.sections():
        if sec not in known and not sec.startswith("scheme "):
            raise ConfigParseError(f"unknown section [{sec}]", _line_of(text, sec))

    kwargs = {}

    def take(section, table):
        if not cp.has_section(section):
            return
        for key, value in cp.items(section):
            if key not in table and not (section == "scenario" and key in ("snr_db", "schemes")):
                raise ConfigParseError(f"unknown key {key!r} in [{section}]", _line_of(text, section, key))
            try:
                if key == "snr_db":
                    kwargs[key] = tuple(float(v) for v in _list(value))
                elif key == "schemes":
                    kwargs[key] = _list(value)
                else:
                    kwargs[key] = table[key](value.strip().lower() if key == "metric" else value)
            except ValueError as exc:
                raise ConfigParseError(f"bad value for {key!r}: {value!r}", _line_of(text, section, key)) from exc

    take("scenario", _SCENARIO_KEYS)
    take("optimizer", _OPTIMIZER_KEYS)

    defs = dict(DEFAULT_SCHEMES)
    custom = []
    for sec in cp.sections():
        if not sec.startswith("scheme "):
            continue
        name = sec[len("scheme "):].strip()
        try:
            layers = _list(cp.get(sec, "layers"))
            relay = _bool(cp.get(sec, "relay", fallback="yes"))
            defs[name] = SchemeDef(name, tuple(layers), relay)
        except (configparser.Error, ValueError) as exc:
            raise ConfigParseError(f"bad scheme [{sec}]: {exc}", _line_of(text, sec)) from exc
        custom.append(name)

    names = kwargs.pop("schemes", None)
    if names is None:
        names = list(DEFAULT_SCHEMES) + [n for n in custom if n not in DEFAULT_SCHEMES]
    missing = [n for n in names if n not in defs]
    if missing:
        raise ConfigurationError(f"invalid scenario fields: schemes (unknown {', '.join(missing)})")
    kwargs["schemes"] = tuple(defs[n] for n in names)
    return Scenario(**kwargs)


def build_scenario(path) -> Scenario:
    """Read and validate a scenario configuration file."""
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def with_overrides(scenario: Scenario, **changes) -> Scenario:
    """Copy of ``scenario`` with some fields replaced (placement recomputed)."""
    changes = {k: v for k, v in changes.items() if v is not None}
    placement_changed = {"side_length", "destinations", "placement_seed"} & changes.keys()
    if placement_changed:
        changes["positions"] = None
    return replace(scenario, **changes)

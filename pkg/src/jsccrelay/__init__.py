"""Layered JSCC multicast over a decode-and-forward relay: distortion
analysis, power-allocation optimization and a symbol-level simulator."""
from .channel import FadingSpec, FixedGain, Geometry, LinkTriple, Network, nakagami_cdf, nakagami_pdf
from .eed import WORST, EedModel, expected_eed, instantaneous_eed, network_eed, weighted_objective
from .errors import ConfigurationError, DomainError
from .hiermod import HierScheme, Kind, LayerModulation, cumulative_ser, layer_ser_profile
from .link import cumulative_link_ser, e2e_ser, event_distribution, expected_e2e_ser

__version__ = "0.1.0"

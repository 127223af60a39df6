"""Deterministic discrete-event simulator for IEEE 802.15.4e TSCH networks.

Implements slotframe/ASN arithmetic, channel hopping, static convergecast
routing trees, 6P add/delete cell negotiation and two pluggable scheduling
functions: the threshold-driven minimal scheduling function (MSF) and an
enhanced variant (EMSF) that predicts next-slotframe cell demand from the
mode of a Poisson fit to recent traffic.
"""

from tschsim.core import (
    Cell,
    HoppingConfig,
    LinkOption,
    Schedule,
    SlotframeParams,
    compute_asn,
    hop_frequency,
    slot_coordinates,
)
from tschsim.engine import SimConfig, run_simulation
from tschsim.telemetry import MetricsLog

__version__ = "0.1.0"

__all__ = [
    "Cell",
    "HoppingConfig",
    "LinkOption",
    "MetricsLog",
    "Schedule",
    "SimConfig",
    "SlotframeParams",
    "compute_asn",
    "hop_frequency",
    "run_simulation",
    "slot_coordinates",
]

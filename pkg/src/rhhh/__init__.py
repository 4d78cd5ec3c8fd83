"""Randomized hierarchical heavy hitters over IPv4 prefix lattices."""

from .calibration import Calibration, derive
from .hierarchy import Hierarchy, Prefix, PrefixPattern, pack, unpack
from .sketch import FrequencyEstimate, HhhEntry, HhhSet, RhhhSketch
from .space_saving import CounterBank, SpaceSaving

__all__ = [
    "Calibration",
    "derive",
    "Hierarchy",
    "Prefix",
    "PrefixPattern",
    "pack",
    "unpack",
    "FrequencyEstimate",
    "HhhEntry",
    "HhhSet",
    "RhhhSketch",
    "CounterBank",
    "SpaceSaving",
]

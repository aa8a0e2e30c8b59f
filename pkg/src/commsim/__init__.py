"""Monte Carlo simulator for digital communication systems.

Systems are described in text configuration files (codec, mapper, modem and
separate transmit/receive channels) and simulated locally or across TCP
clients until binomial confidence-interval stopping rules are met.
"""

from . import channel, codec, commsys, fsm, mapper, modem, simulator  # registers components
from .core import (
    ProbTable,
    RandomSource,
    SymbolBlock,
    gray_decode,
    gray_encode,
    levenshtein,
    normal_quantile,
    qfunc,
)

__all__ = [
    "channel",
    "codec",
    "commsys",
    "fsm",
    "mapper",
    "modem",
    "simulator",
    "ProbTable",
    "RandomSource",
    "SymbolBlock",
    "gray_encode",
    "gray_decode",
    "qfunc",
    "normal_quantile",
    "levenshtein",
]

__version__ = "0.1.0"

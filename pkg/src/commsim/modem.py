"""Modems: abstract symbols to channel representations and soft demodulation.

Signal-space constellations are unit average energy. Constellation position k
carries the symbol label gray(k), so geometric neighbors always differ in one
label bit; modulating symbol s therefore places it at position gray_decode(s).
For BPSK this puts symbol 0 at +1 and symbol 1 at -1.
"""

from __future__ import annotations

import numpy as np

from .config import Component, ConfigWriter, TokenStream, register
from .core import ProbTable, SymbolBlock, gray_decode

__all__ = ["Modem", "Mpsk", "Qam", "DirectModem"]


class Modem(Component):
    """Modulation contract; ``m`` is the symbol alphabet size."""

    category = "modem"

    m: int
    signal_space: bool

    def modulate(self, s: SymbolBlock):
        raise NotImplementedError

    def demodulate(self, rx, rxchan) -> ProbTable:
        """Per-position symbol likelihood table under the receive channel's kernel."""
        raise NotImplementedError

    def _check_alphabet(self, s: SymbolBlock) -> None:
        if s.q != self.m:
            raise ValueError(f"symbol alphabet {s.q} does not match modem order {self.m}")


class _SignalModem(Modem):
    """Common signal-space behavior over a per-symbol constellation point array."""

    signal_space = True
    _symbol_points: np.ndarray  # complex point for each symbol value

    def modulate(self, s: SymbolBlock) -> np.ndarray:
        self._check_alphabet(s)
        return self._symbol_points[s.data]

    def demodulate(self, rx: np.ndarray, rxchan) -> ProbTable:
        rx = np.asarray(rx, dtype=np.complex128)
        table, _ = ProbTable(rxchan.likelihood_matrix(self._symbol_points, rx)).normalized()
        return table

    def constellation(self) -> np.ndarray:
        return self._symbol_points.copy()


@register
class Mpsk(_SignalModem):
    """M-ary phase shift keying on the unit circle with Gray-coded labels."""

    name = "mpsk"

    def __init__(self, m: int) -> None:
        m = int(m)
        if m < 2 or m & (m - 1):
            raise ValueError(f"PSK order must be a power of two >= 2, got {m}")
        self.m = m
        ring = np.exp(2j * np.pi * np.arange(m) / m)
        self._symbol_points = ring[[gray_decode(s, m) for s in range(m)]]

    def description(self) -> str:
        return f"mpsk(m={self.m})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Alphabet size", self.m)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Mpsk":
        return cls(ts.next_int("alphabet size"))


@register
class Qam(_SignalModem):
    """Square quadrature amplitude modulation, Gray coded independently per axis.

    The upper half of a symbol's bits select the in-phase level, the lower half
    the quadrature level; the grid is scaled to unit average energy.
    """

    name = "qam"

    def __init__(self, m: int) -> None:
        m = int(m)
        side = round(m ** 0.5)
        if side * side != m or side < 2 or side & (side - 1):
            raise ValueError(f"QAM order must be a square power of four, got {m}")
        self.m = m
        self.side = side
        bits = side.bit_length() - 1
        levels = 2.0 * np.arange(side) - (side - 1)
        scale = (2.0 * (side * side - 1) / 3.0) ** -0.5
        pts = np.empty(m, dtype=np.complex128)
        for s in range(m):
            u = gray_decode(s >> bits, side)
            v = gray_decode(s & (side - 1), side)
            pts[s] = (levels[u] + 1j * levels[v]) * scale
        self._symbol_points = pts

    def description(self) -> str:
        return f"qam(m={self.m})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Alphabet size", self.m)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Qam":
        return cls(ts.next_int("alphabet size"))


@register
class DirectModem(Modem):
    """Identity modem for abstract q-ary channels."""

    name = "direct_blockmodem"
    signal_space = False

    def __init__(self, q: int) -> None:
        q = int(q)
        if q < 2:
            raise ValueError(f"alphabet size must be >= 2, got {q}")
        self.m = q

    def modulate(self, s: SymbolBlock) -> SymbolBlock:
        self._check_alphabet(s)
        return SymbolBlock(s.q, s.data.copy())

    def demodulate(self, rx: SymbolBlock, rxchan) -> ProbTable:
        kernel = rxchan.symbol_likelihood_table(self.m)
        if rx.data.size and rx.data.max() >= kernel.shape[0]:
            raise ValueError("received symbol outside the channel's output alphabet")
        table, _ = ProbTable(kernel[rx.data]).normalized()
        return table

    def description(self) -> str:
        return f"direct(q={self.m})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Alphabet size", self.m)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "DirectModem":
        return cls(ts.next_int("alphabet size"))

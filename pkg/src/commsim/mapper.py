"""Symbol translation between codec output and modem alphabet.

Mappers are bound to the codec side (alphabet and block length) when a system
is wired; binding is runtime state and never serialized, as is the interleaved
mapper's current permutation.
"""

from __future__ import annotations

import numpy as np

from .config import Component, ConfigWriter, TokenStream, register
from .core import ProbTable, RandomSource, SymbolBlock

__all__ = ["Mapper", "MapStraight", "MapInterleaved", "MapDividing", "MapAggregating"]


def _exact_log(value: int, base: int) -> int:
    """f with base**f == value, or raise."""
    f, acc = 0, 1
    while acc < value:
        acc *= base
        f += 1
    if acc != value:
        raise ValueError(f"{value} is not a power of {base}")
    return f


class Mapper(Component):
    """Translation stage contract: forward on symbols, inverse on probability tables."""

    category = "mapper"

    def bind(self, q_in: int, n_in: int) -> None:
        """Attach to the codec side of the pipeline; validates compatibility."""
        if q_in < 2 or n_in < 1:
            raise ValueError("mapper needs alphabet >= 2 and positive block length")
        self.q_in = q_in
        self.n_in = n_in

    @property
    def q_out(self) -> int:
        return self.q_in

    @property
    def n_out(self) -> int:
        return self.n_in

    def advance(self, rng: RandomSource) -> None:
        """Refresh per-frame randomness; no-op for deterministic mappers."""

    def transform(self, block: SymbolBlock) -> SymbolBlock:
        raise NotImplementedError

    def inverse(self, pin: ProbTable) -> ProbTable:
        raise NotImplementedError

    def _check_in(self, block: SymbolBlock) -> None:
        if block.q != self.q_in or len(block) != self.n_in:
            raise ValueError(
                f"mapper input {len(block)}x{block.q} does not match bound {self.n_in}x{self.q_in}"
            )

    def _check_table(self, pin: ProbTable) -> None:
        if pin.q != self.q_out or len(pin) != self.n_out:
            raise ValueError(
                f"mapper table {len(pin)}x{pin.q} does not match modem side {self.n_out}x{self.q_out}"
            )


@register
class MapStraight(Mapper):
    """Identity: one modulation symbol per encoder symbol."""

    name = "map_straight"

    def transform(self, block: SymbolBlock) -> SymbolBlock:
        self._check_in(block)
        return SymbolBlock(block.q, block.data.copy())

    def inverse(self, pin: ProbTable) -> ProbTable:
        self._check_table(pin)
        return ProbTable(pin.p.copy())

    def description(self) -> str:
        return "straight"


@register
class MapInterleaved(Mapper):
    """Uniform random permutation of the symbols within each frame."""

    name = "map_interleaved"

    def bind(self, q_in: int, n_in: int) -> None:
        super().bind(q_in, n_in)
        self._perm = np.arange(n_in)

    def advance(self, rng: RandomSource) -> None:
        self._perm = rng.permutation(self.n_in)

    def transform(self, block: SymbolBlock) -> SymbolBlock:
        self._check_in(block)
        return SymbolBlock(block.q, block.data[self._perm])

    def inverse(self, pin: ProbTable) -> ProbTable:
        self._check_table(pin)
        out = np.empty_like(pin.p)
        out[self._perm] = pin.p
        return ProbTable(out)

    def description(self) -> str:
        return "interleaved"


@register
class MapDividing(Mapper):
    """Each encoder symbol expands to f modem symbols (base-q_out digits, MSB first)."""

    name = "map_dividing"

    def __init__(self, q_in: int, q_out: int) -> None:
        q_in, q_out = int(q_in), int(q_out)
        if q_out < 2:
            raise ValueError("output alphabet must be >= 2")
        self.factor = _exact_log(q_in, q_out)
        if self.factor < 2:
            raise ValueError("dividing factor must be >= 2 (use map_straight otherwise)")
        self._q_in = q_in
        self._q_out = q_out
        # digit place values, most significant first
        self._places = q_out ** np.arange(self.factor - 1, -1, -1, dtype=np.int64)

    def bind(self, q_in: int, n_in: int) -> None:
        if q_in != self._q_in:
            raise ValueError(f"dividing mapper expects alphabet {self._q_in}, got {q_in}")
        super().bind(q_in, n_in)

    @property
    def q_out(self) -> int:
        return self._q_out

    @property
    def n_out(self) -> int:
        return self.n_in * self.factor

    def transform(self, block: SymbolBlock) -> SymbolBlock:
        self._check_in(block)
        digits = (block.data[:, None] // self._places) % self._q_out
        return SymbolBlock(self._q_out, digits.reshape(-1))

    def inverse(self, pin: ProbTable) -> ProbTable:
        self._check_table(pin)
        # independent digits: the packed-symbol probability is the digit product
        digits = (np.arange(self._q_in)[:, None] // self._places) % self._q_out
        per_digit = pin.p.reshape(self.n_in, self.factor, self._q_out)
        out = np.ones((self.n_in, self._q_in))
        for d in range(self.factor):
            out *= per_digit[:, d, :][:, digits[:, d]]
        return ProbTable(out)

    def description(self) -> str:
        return f"dividing({self._q_in}->{self._q_out}^{self.factor})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Input alphabet size", self._q_in)
        w.field("Output alphabet size", self._q_out)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "MapDividing":
        return cls(ts.next_int("input alphabet size"), ts.next_int("output alphabet size"))


@register
class MapAggregating(Mapper):
    """Groups of f encoder symbols pack into one modem symbol (MSB first)."""

    name = "map_aggregating"

    def __init__(self, q_in: int, q_out: int) -> None:
        q_in, q_out = int(q_in), int(q_out)
        if q_in < 2:
            raise ValueError("input alphabet must be >= 2")
        self.factor = _exact_log(q_out, q_in)
        if self.factor < 2:
            raise ValueError("aggregating factor must be >= 2 (use map_straight otherwise)")
        self._q_in = q_in
        self._q_out = q_out
        self._places = q_in ** np.arange(self.factor - 1, -1, -1, dtype=np.int64)

    def bind(self, q_in: int, n_in: int) -> None:
        if q_in != self._q_in:
            raise ValueError(f"aggregating mapper expects alphabet {self._q_in}, got {q_in}")
        if n_in % self.factor:
            raise ValueError(f"block length {n_in} not a multiple of factor {self.factor}")
        super().bind(q_in, n_in)

    @property
    def q_out(self) -> int:
        return self._q_out

    @property
    def n_out(self) -> int:
        return self.n_in // self.factor

    def transform(self, block: SymbolBlock) -> SymbolBlock:
        self._check_in(block)
        groups = block.data.reshape(self.n_out, self.factor)
        return SymbolBlock(self._q_out, groups @ self._places)

    def inverse(self, pin: ProbTable) -> ProbTable:
        self._check_table(pin)
        # marginalize each packed symbol's mass onto its component symbols
        digits = (np.arange(self._q_out)[:, None] // self._places) % self._q_in
        out = np.empty((self.n_in, self._q_in))
        for d in range(self.factor):
            onehot = np.zeros((self._q_out, self._q_in))
            onehot[np.arange(self._q_out), digits[:, d]] = 1.0
            out[d :: self.factor] = pin.p @ onehot
        return ProbTable(out)

    def description(self) -> str:
        return f"aggregating({self._q_in}^{self.factor}->{self._q_out})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Input alphabet size", self._q_in)
        w.field("Output alphabet size", self._q_out)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "MapAggregating":
        return cls(ts.next_int("input alphabet size"), ts.next_int("output alphabet size"))

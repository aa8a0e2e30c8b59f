"""Finite state machines behind convolutional codes.

Generator polynomials are written as 0/1 strings with increasing delay left to
right: "1011011" means 1 + z^-2 + z^-3 + z^-5 + z^-6. States are packed
integers; within each input's shift register the most recent bit is the least
significant, registers of successive inputs occupy successively higher bits.
New bits enter at the low-delay end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Component, ConfigWriter, TokenStream, register

__all__ = ["Fsm", "Nrcc", "Rscc", "Zsm", "IoTable"]

DEFAULT_TABLE_LIMIT = 1 << 20


def _parse_poly(s: str) -> int:
    """0/1 string to a tap mask (bit l set = coefficient of z^-l)."""
    if not s or any(c not in "01" for c in s):
        raise ValueError(f"generator polynomial must be a nonempty 0/1 string, got {s!r}")
    return sum(1 << l for l, c in enumerate(s) if c == "1")


@dataclass
class IoTable:
    """Precomputed step() results: per (state, input) the output bits and next state."""

    outputs: np.ndarray  # (states, inputs, n) uint8
    next_state: np.ndarray  # (states, inputs) int64


class Fsm(Component):
    """State machine interface: k input bits and n output bits per step."""

    category = "fsm"

    k: int
    n: int
    nu: int  # total memory (register bits)

    @property
    def num_states(self) -> int:
        return 1 << self.nu

    @property
    def num_inputs(self) -> int:
        return 1 << self.k

    @property
    def tail_steps(self) -> int:
        """Steps of tail_input needed to reach state zero from anywhere."""
        raise NotImplementedError

    def step(self, state: int, inp: int) -> tuple[tuple[int, ...], int]:
        raise NotImplementedError

    def tail_input(self, state: int) -> int:
        raise NotImplementedError

    def _check(self, state: int, inp: int) -> None:
        if not 0 <= state < self.num_states:
            raise ValueError(f"state {state} out of range for {self.num_states} states")
        if not 0 <= inp < self.num_inputs:
            raise ValueError(f"input {inp} out of range for arity {self.k}")

    def io_table(self, max_entries: int = DEFAULT_TABLE_LIMIT) -> IoTable:
        """Tabulate step() over every (state, input) pair."""
        entries = self.num_states * self.num_inputs
        if entries > max_entries:
            raise ValueError(f"io table of {entries} entries exceeds limit {max_entries}")
        outputs = np.zeros((self.num_states, self.num_inputs, self.n), dtype=np.uint8)
        next_state = np.zeros((self.num_states, self.num_inputs), dtype=np.int64)
        for s in range(self.num_states):
            for u in range(self.num_inputs):
                out, nxt = self.step(s, u)
                outputs[s, u] = out
                next_state[s, u] = nxt
        return IoTable(outputs, next_state)


class _ShiftRegisterFsm(Fsm):
    """Common machinery for controller-canonical-form binary machines."""

    # per input i: register length _reg_len[i], bit offset _reg_off[i] in the state,
    # and per output j a tap mask _taps[i][j] over [current bit, register bits].
    _reg_len: list[int]
    _reg_off: list[int]
    _taps: list[list[int]]

    def _history(self, state: int, i: int, current: int) -> int:
        """Bit l = value of this register's stream at delay l (delay 0 = current)."""
        reg = (state >> self._reg_off[i]) & ((1 << self._reg_len[i]) - 1)
        return current | (reg << 1)

    def _outputs_next(self, state: int, current_bits: list[int]) -> tuple[tuple[int, ...], int]:
        out = [0] * self.n
        nxt = 0
        for i in range(self.k):
            h = self._history(state, i, current_bits[i])
            for j in range(self.n):
                out[j] ^= bin(h & self._taps[i][j]).count("1") & 1
            if self._reg_len[i]:
                nxt |= (h & ((1 << self._reg_len[i]) - 1)) << self._reg_off[i]
        return tuple(out), nxt

    @property
    def tail_steps(self) -> int:
        return max(self._reg_len, default=0)


@register
class Nrcc(_ShiftRegisterFsm):
    """Non-recursive binary convolutional encoder in controller canonical form."""

    name = "nrcc"

    def __init__(self, generators: list[list[str]]) -> None:
        if not generators or not all(row for row in generators):
            raise ValueError("generator matrix must be nonempty")
        n = len(generators[0])
        if any(len(row) != n for row in generators):
            raise ValueError("all generator rows must have the same number of outputs")
        self.generators = [[str(g) for g in row] for row in generators]
        self.k = len(generators)
        self.n = n
        self._taps = [[_parse_poly(g) for g in row] for row in self.generators]
        self._reg_len = [max(len(g) for g in row) - 1 for row in self.generators]
        self._reg_off = list(np.cumsum([0] + self._reg_len[:-1], dtype=int))
        self.nu = sum(self._reg_len)

    def step(self, state: int, inp: int) -> tuple[tuple[int, ...], int]:
        self._check(state, inp)
        bits = [(inp >> i) & 1 for i in range(self.k)]
        return self._outputs_next(state, bits)

    def tail_input(self, state: int) -> int:
        self._check(state, 0)
        return 0

    def description(self) -> str:
        polys = ";".join(",".join(row) for row in self.generators)
        return f"nrcc({polys})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Inputs", self.k)
        w.field("Outputs", self.n)
        w.field_list("Generators (row per input, one polynomial per output)",
                     [g for row in self.generators for g in row])

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Nrcc":
        k = ts.next_int("input count")
        n = ts.next_int("output count")
        if k < 1 or n < 1:
            raise ValueError("input and output counts must be positive")
        gens = [[ts.next("generator polynomial") for _ in range(n)] for _ in range(k)]
        return cls(gens)


@register
class Rscc(_ShiftRegisterFsm):
    """Recursive binary convolutional encoder in controller canonical form.

    Each input register feeds back through its feedback polynomial (whose z^0
    coefficient must be 1); feedforward polynomials tap the internal stream.
    """

    name = "rscc"

    def __init__(self, feedback: list[str], feedforward: list[list[str]]) -> None:
        if not feedback or len(feedback) != len(feedforward):
            raise ValueError("need one feedback polynomial per input register")
        n = len(feedforward[0]) if feedforward and feedforward[0] else 0
        if n < 1 or any(len(row) != n for row in feedforward):
            raise ValueError("all feedforward rows must have the same number of outputs")
        for f in feedback:
            if not f or f[0] != "1":
                raise ValueError(f"feedback polynomial must start with 1 (z^0 tap), got {f!r}")
        self.feedback = [str(f) for f in feedback]
        self.feedforward = [[str(g) for g in row] for row in feedforward]
        self.k = len(feedback)
        self.n = n
        self._fb = [_parse_poly(f) >> 1 for f in self.feedback]  # taps on register only
        self._taps = [[_parse_poly(g) for g in row] for row in self.feedforward]
        self._reg_len = [
            max(len(self.feedback[i]), max(len(g) for g in self.feedforward[i])) - 1
            for i in range(self.k)
        ]
        self._reg_off = list(np.cumsum([0] + self._reg_len[:-1], dtype=int))
        self.nu = sum(self._reg_len)

    def _feedback_bit(self, state: int, i: int) -> int:
        reg = (state >> self._reg_off[i]) & ((1 << self._reg_len[i]) - 1)
        return bin(reg & self._fb[i]).count("1") & 1

    def step(self, state: int, inp: int) -> tuple[tuple[int, ...], int]:
        self._check(state, inp)
        internal = [((inp >> i) & 1) ^ self._feedback_bit(state, i) for i in range(self.k)]
        return self._outputs_next(state, internal)

    def tail_input(self, state: int) -> int:
        """The input cancelling each register's feedback, driving it toward zero."""
        self._check(state, 0)
        u = 0
        for i in range(self.k):
            u |= self._feedback_bit(state, i) << i
        return u

    def description(self) -> str:
        ff = ";".join(",".join(row) for row in self.feedforward)
        return f"rscc(fb={','.join(self.feedback)};{ff})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Inputs", self.k)
        w.field("Outputs", self.n)
        w.field_list("Feedback polynomials (one per input)", self.feedback)
        w.field_list("Feedforward polynomials (row per input, one per output)",
                     [g for row in self.feedforward for g in row])

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Rscc":
        k = ts.next_int("input count")
        n = ts.next_int("output count")
        if k < 1 or n < 1:
            raise ValueError("input and output counts must be positive")
        fb = [ts.next("feedback polynomial") for _ in range(k)]
        ff = [[ts.next("feedforward polynomial") for _ in range(n)] for _ in range(k)]
        return cls(fb, ff)


@register
class Zsm(Fsm):
    """Stateless repeater: one input bit emitted on every one of its outputs."""

    name = "zsm"

    def __init__(self, repeats: int) -> None:
        repeats = int(repeats)
        if repeats < 1:
            raise ValueError("repetition factor must be >= 1")
        self.repeats = repeats
        self.k = 1
        self.n = repeats
        self.nu = 0

    @property
    def tail_steps(self) -> int:
        return 0

    def step(self, state: int, inp: int) -> tuple[tuple[int, ...], int]:
        self._check(state, inp)
        return (inp,) * self.repeats, 0

    def tail_input(self, state: int) -> int:
        self._check(state, 0)
        return 0

    def description(self) -> str:
        return f"zsm(x{self.repeats})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Repetition factor", self.repeats)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Zsm":
        return cls(ts.next_int("repetition factor"))

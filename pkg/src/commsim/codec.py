"""Encoder/decoder layer: plain copy, repetition, and convolutional coding.

All codecs are soft-in/soft-out: the decoder is first initialized with the
per-position channel statistics of the encoded sequence (optionally multiplied
by priors over the information sequence), then queried for posterior tables
and hard decisions. Decoder state makes instances single-frame objects: clone
per worker for concurrent use.
"""

from __future__ import annotations

import math

import numpy as np

from .config import Component, ConfigWriter, TokenStream, deserialize_component, register
from .core import ProbTable, SymbolBlock
from .fsm import Fsm

__all__ = ["Codec", "Uncoded", "RepetitionCodec", "Mapcc"]


class Codec(Component):
    """Soft-in/soft-out codec contract."""

    category = "codec"

    input_block_size: int
    output_block_size: int
    q_in: int
    q_out: int

    def __init__(self) -> None:
        self.zero_row_count = 0  # all-zero likelihood rows patched to uniform

    @property
    def iterations(self) -> int:
        return 1

    @property
    def rate(self) -> float:
        return (self.input_block_size * math.log2(self.q_in)) / (
            self.output_block_size * math.log2(self.q_out)
        )

    def encode(self, src: SymbolBlock) -> SymbolBlock:
        raise NotImplementedError

    def init_decoder(self, ptable: ProbTable, app: ProbTable | None = None) -> None:
        raise NotImplementedError

    def softdecode(self, with_encoded: bool = False):
        """Posterior table over information symbols; with ``with_encoded`` also
        the posterior over encoded symbols, as a (ri, ro) pair."""
        raise NotImplementedError

    def decode_hard(self) -> SymbolBlock:
        """Per-position argmax of the information posterior (ties to the smaller symbol)."""
        ri = self.softdecode()
        return SymbolBlock(self.q_in, np.argmax(ri.p, axis=1))

    # shared validation helpers

    def _check_src(self, src: SymbolBlock) -> None:
        if src.q != self.q_in:
            raise ValueError(f"source alphabet {src.q} != codec input alphabet {self.q_in}")
        if len(src) != self.input_block_size:
            raise ValueError(f"source length {len(src)} != block size {self.input_block_size}")

    def _check_tables(self, ptable: ProbTable, app: ProbTable | None) -> None:
        if (len(ptable), ptable.q) != (self.output_block_size, self.q_out):
            raise ValueError(
                f"channel statistics shape {len(ptable)}x{ptable.q} does not match "
                f"encoded block {self.output_block_size}x{self.q_out}"
            )
        if app is not None and (len(app), app.q) != (self.input_block_size, self.q_in):
            raise ValueError(
                f"prior table shape {len(app)}x{app.q} does not match "
                f"information block {self.input_block_size}x{self.q_in}"
            )

    def _clean_rows(self, p: np.ndarray) -> np.ndarray:
        """Replace zero-mass rows by uniform, counting them."""
        sums = p.sum(axis=1)
        dead = sums <= 0.0
        if dead.any():
            self.zero_row_count += int(dead.sum())
            p = p.copy()
            p[dead] = 1.0 / p.shape[1]
        return p

    def _normalized(self, p: np.ndarray) -> ProbTable:
        table, nzero = ProbTable(p).normalized()
        self.zero_row_count += nzero
        return table


@register
class Uncoded(Codec):
    """Pass-through codec: the encoded sequence is the information sequence."""

    name = "uncoded<double>"

    def __init__(self, q: int, block_length: int) -> None:
        super().__init__()
        q, block_length = int(q), int(block_length)
        if q < 2 or block_length < 1:
            raise ValueError("need alphabet size >= 2 and block length >= 1")
        self.q_in = self.q_out = q
        self.input_block_size = self.output_block_size = block_length
        self._R: np.ndarray | None = None

    def encode(self, src: SymbolBlock) -> SymbolBlock:
        self._check_src(src)
        return SymbolBlock(src.q, src.data.copy())

    def init_decoder(self, ptable: ProbTable, app: ProbTable | None = None) -> None:
        self._check_tables(ptable, app)
        R = ptable.p
        if app is not None:
            R = R * app.p
        self._R = self._clean_rows(np.asarray(R, dtype=np.float64))

    def softdecode(self, with_encoded: bool = False):
        if self._R is None:
            raise RuntimeError("decoder not initialized")
        ri = self._normalized(self._R)
        return (ri, ri) if with_encoded else ri

    def description(self) -> str:
        return f"uncoded(q={self.q_in}, N={self.input_block_size})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Alphabet size", self.q_in)
        w.field("Block length", self.input_block_size)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Uncoded":
        return cls(ts.next_int("alphabet size"), ts.next_int("block length"))


@register
class RepetitionCodec(Codec):
    """Memoryless repetition: each information symbol sent as r consecutive copies."""

    name = "memoryless<double>"

    def __init__(self, q: int, block_length: int, repeats: int) -> None:
        super().__init__()
        q, block_length, repeats = int(q), int(block_length), int(repeats)
        if q < 2 or block_length < 1 or repeats < 1:
            raise ValueError("need q >= 2, block length >= 1 and repeats >= 1")
        self.q_in = self.q_out = q
        self.input_block_size = block_length
        self.repeats = repeats
        self.output_block_size = block_length * repeats
        self._R: np.ndarray | None = None
        self._app: np.ndarray | None = None

    def encode(self, src: SymbolBlock) -> SymbolBlock:
        self._check_src(src)
        return SymbolBlock(src.q, np.repeat(src.data, self.repeats))

    def init_decoder(self, ptable: ProbTable, app: ProbTable | None = None) -> None:
        self._check_tables(ptable, app)
        self._R = self._clean_rows(np.asarray(ptable.p, dtype=np.float64))
        self._app = None if app is None else app.p.copy()

    def softdecode(self, with_encoded: bool = False):
        if self._R is None:
            raise RuntimeError("decoder not initialized")
        # Per-copy likelihoods multiply (independent channel uses).
        combined = self._R.reshape(self.input_block_size, self.repeats, self.q_in).prod(axis=1)
        if self._app is not None:
            combined = combined * self._app
        ri = self._normalized(combined)
        if not with_encoded:
            return ri
        # each copy equals its source symbol, so its posterior is the source's
        ro = ProbTable(np.repeat(ri.p, self.repeats, axis=0))
        return ri, ro

    def description(self) -> str:
        return f"repetition(q={self.q_in}, N={self.input_block_size}, r={self.repeats})"

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Alphabet size", self.q_in)
        w.field("Block length", self.input_block_size)
        w.field("Repetition factor", self.repeats)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "RepetitionCodec":
        return cls(
            ts.next_int("alphabet size"),
            ts.next_int("block length"),
            ts.next_int("repetition factor"),
        )


@register
class Mapcc(Codec):
    """Convolutional code over a binary state machine with exact symbol-MAP decoding.

    Encoding runs the machine from the zero state over the information bits and
    appends tail steps driving it back to zero; the per-step output bits are
    interleaved in output order. Decoding computes exact per-symbol posterior
    marginals with the forward-backward recursion over the trellis, metrics
    renormalized at every step to stay in double-precision range.
    """

    name = "mapcc<double>"

    def __init__(self, machine: Fsm, info_bits: int) -> None:
        super().__init__()
        info_bits = int(info_bits)
        if info_bits < 1:
            raise ValueError("information block must hold at least one bit")
        if info_bits % machine.k:
            raise ValueError(f"information bits {info_bits} not a multiple of arity {machine.k}")
        self.machine = machine
        self.q_in = self.q_out = 2
        self.input_block_size = info_bits
        self.info_steps = info_bits // machine.k
        self.total_steps = self.info_steps + machine.tail_steps
        self.output_block_size = self.total_steps * machine.n
        self._table = machine.io_table()
        self._R: np.ndarray | None = None
        self._app: np.ndarray | None = None
        self._posteriors: tuple[ProbTable, ProbTable] | None = None
        # flat transition view: e = s * num_inputs + u
        S, U = machine.num_states, machine.num_inputs
        self._src_of_e = np.repeat(np.arange(S), U)
        self._inp_of_e = np.tile(np.arange(U), S)
        self._next_of_e = self._table.next_state.reshape(S * U)
        self._bits_of_e = self._table.outputs.reshape(S * U, machine.n)
        tail_u = np.array([machine.tail_input(s) for s in range(S)], dtype=np.int64)
        self._tail_allowed = self._inp_of_e == tail_u[self._src_of_e]

    def encode(self, src: SymbolBlock) -> SymbolBlock:
        self._check_src(src)
        m = self.machine
        out = np.empty(self.output_block_size, dtype=np.int64)
        bits = src.data
        state = 0
        pos = 0
        for t in range(self.info_steps):
            u = 0
            for i in range(m.k):
                u |= int(bits[t * m.k + i]) << i
            out[pos : pos + m.n] = self._table.outputs[state, u]
            state = int(self._table.next_state[state, u])
            pos += m.n
        for _ in range(m.tail_steps):
            u = m.tail_input(state)
            out[pos : pos + m.n] = self._table.outputs[state, u]
            state = int(self._table.next_state[state, u])
            pos += m.n
        assert state == 0
        return SymbolBlock(2, out)

    def init_decoder(self, ptable: ProbTable, app: ProbTable | None = None) -> None:
        self._check_tables(ptable, app)
        self._R = self._clean_rows(np.asarray(ptable.p, dtype=np.float64))
        self._app = None if app is None else app.p.copy()
        self._posteriors = None

    def softdecode(self, with_encoded: bool = False):
        if self._R is None:
            raise RuntimeError("decoder not initialized")
        if self._posteriors is None:
            self._posteriors = self._forward_backward()
        ri, ro = self._posteriors
        return (ri, ro) if with_encoded else ri

    def _transition_weights(self) -> np.ndarray:
        """gamma[t, e]: channel likelihood of step t's outputs times the input prior."""
        m = self.machine
        T = self.total_steps
        R3 = self._R.reshape(T, m.n, 2)
        gamma = np.ones((T, self._bits_of_e.shape[0]))
        for j in range(m.n):
            gamma *= R3[:, j, :][:, self._bits_of_e[:, j]]
        if self._app is not None:
            A3 = self._app.reshape(self.info_steps, m.k, 2)
            for i in range(m.k):
                gamma[: self.info_steps] *= A3[:, i, :][:, (self._inp_of_e >> i) & 1]
        gamma[self.info_steps :, ~self._tail_allowed] = 0.0
        return gamma

    def _forward_backward(self) -> tuple[ProbTable, ProbTable]:
        m = self.machine
        S = m.num_states
        T = self.total_steps
        gamma = self._transition_weights()
        src, nxt = self._src_of_e, self._next_of_e

        alpha = np.zeros((T + 1, S))
        alpha[0, 0] = 1.0
        for t in range(T):
            a = np.bincount(nxt, weights=alpha[t][src] * gamma[t], minlength=S)
            tot = a.sum()
            alpha[t + 1] = a / tot if tot > 0.0 else 1.0 / S

        beta = np.zeros((T + 1, S))
        beta[T, 0] = 1.0  # tail termination pins the final state
        for t in range(T - 1, -1, -1):
            b = np.bincount(src, weights=gamma[t] * beta[t + 1][nxt], minlength=S)
            tot = b.sum()
            beta[t] = b / tot if tot > 0.0 else 1.0 / S

        sigma = alpha[:T][:, src] * gamma * beta[1:][:, nxt]  # (T, transitions)

        ri = np.empty((self.input_block_size, 2))
        info = sigma[: self.info_steps]
        for i in range(m.k):
            one = ((self._inp_of_e >> i) & 1).astype(np.float64)
            ri[i :: m.k, 1] = info @ one
            ri[i :: m.k, 0] = info @ (1.0 - one)

        ro = np.empty((self.output_block_size, 2))
        for j in range(m.n):
            one = self._bits_of_e[:, j].astype(np.float64)
            ro[j :: m.n, 1] = sigma @ one
            ro[j :: m.n, 0] = sigma @ (1.0 - one)

        return self._normalized(ri), self._normalized(ro)

    def description(self) -> str:
        return f"mapcc({self.machine.description()}, N={self.input_block_size})"

    def write_params(self, w: ConfigWriter) -> None:
        w.child("Encoder state machine", self.machine)
        w.field("Information bits per frame", self.input_block_size)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Mapcc":
        machine = deserialize_component(ts, "fsm")
        info_bits = ts.next_int("information bits per frame")
        return cls(machine, info_bits)

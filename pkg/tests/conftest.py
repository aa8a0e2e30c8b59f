"""Shared test helpers: random component factories and independent oracles."""

from __future__ import annotations

import numpy as np

from commsim.channel import Awgn, Laplacian, Qec, Qsc
from commsim.codec import Mapcc, RepetitionCodec, Uncoded
from commsim.commsys import CommSystem
from commsim.core import SymbolBlock
from commsim.fsm import Nrcc, Rscc, Zsm
from commsim.mapper import MapAggregating, MapDividing, MapInterleaved, MapStraight
from commsim.modem import DirectModem, Mpsk, Qam
from commsim.simulator import ErrorsHamming, ErrorsLevenshtein, HistSymerr, Simulation


def random_poly(rng: np.random.Generator, length: int) -> str:
    bits = rng.integers(0, 2, size=length)
    bits[rng.integers(0, length)] = 1  # never the all-zero string
    return "".join(str(b) for b in bits)


def random_nrcc(rng: np.random.Generator, k=None, n=None, reg_len=None) -> Nrcc:
    k = k or int(rng.integers(1, 3))
    n = n or int(rng.integers(1, 4))
    rows = []
    for _ in range(k):
        length = reg_len or int(rng.integers(2, 5))
        rows.append([random_poly(rng, length) for _ in range(n)])
    return Nrcc(rows)


def random_rscc(rng: np.random.Generator, k=None, n=None, reg_len=None) -> Rscc:
    k = k or int(rng.integers(1, 3))
    n = n or int(rng.integers(1, 4))
    fb, rows = [], []
    for _ in range(k):
        length = reg_len or int(rng.integers(2, 5))
        fb.append("1" + random_poly(rng, length)[1:])
        rows.append([random_poly(rng, length) for _ in range(n)])
    return Rscc(fb, rows)


def random_instance(cls, rng: np.random.Generator):
    """A randomized valid instance of any registered component class."""
    if cls is Uncoded:
        return Uncoded(int(rng.integers(2, 17)), int(rng.integers(1, 400)))
    if cls is RepetitionCodec:
        return RepetitionCodec(int(rng.integers(2, 9)), int(rng.integers(1, 100)),
                               int(rng.integers(1, 6)))
    if cls is Mapcc:
        machine = random_nrcc(rng, k=1) if rng.random() < 0.5 else random_rscc(rng, k=1)
        return Mapcc(machine, int(rng.integers(1, 64)))
    if cls is Nrcc:
        return random_nrcc(rng)
    if cls is Rscc:
        return random_rscc(rng)
    if cls is Zsm:
        return Zsm(int(rng.integers(1, 8)))
    if cls is MapStraight:
        return MapStraight()
    if cls is MapInterleaved:
        return MapInterleaved()
    if cls is MapDividing:
        q_out = int(rng.integers(2, 5))
        return MapDividing(q_out ** int(rng.integers(2, 5)), q_out)
    if cls is MapAggregating:
        q_in = int(rng.integers(2, 5))
        return MapAggregating(q_in, q_in ** int(rng.integers(2, 5)))
    if cls is Mpsk:
        return Mpsk(2 ** int(rng.integers(1, 7)))
    if cls is Qam:
        return Qam(4 ** int(rng.integers(1, 4)))
    if cls is DirectModem:
        return DirectModem(int(rng.integers(2, 17)))
    if cls is Awgn:
        return Awgn()
    if cls is Laplacian:
        return Laplacian()
    if cls is Qsc:
        return Qsc(int(rng.integers(2, 17)))
    if cls is Qec:
        return Qec(int(rng.integers(2, 17)))
    if cls is CommSystem:
        return random_system(rng)
    if cls is ErrorsHamming:
        return ErrorsHamming()
    if cls is ErrorsLevenshtein:
        return ErrorsLevenshtein()
    if cls is HistSymerr:
        return HistSymerr()
    if cls is Simulation:
        sys_ = random_system(rng)
        kinds = ["random", "all-zero", "user"]
        kind = kinds[int(rng.integers(0, 3))]
        seq = None
        if kind == "user":
            seq = rng.integers(0, sys_.q_in, size=sys_.input_block_size).tolist()
        return Simulation(ErrorsHamming(), sys_, kind, seq)
    raise AssertionError(f"no random factory for {cls.__name__}")


def random_system(rng: np.random.Generator) -> CommSystem:
    """A random but consistently wired system."""
    choice = int(rng.integers(0, 4))
    if choice == 0:
        n = int(rng.integers(1, 65))
        return CommSystem(Uncoded(2, n), MapStraight(), Mpsk(2), Awgn(), Awgn())
    if choice == 1:
        q = int(rng.integers(2, 9))
        n = int(rng.integers(1, 65))
        return CommSystem(RepetitionCodec(q, n, int(rng.integers(1, 4))), MapInterleaved(),
                          DirectModem(q), Qsc(q), Qsc(q))
    if choice == 2:
        machine = random_nrcc(rng, k=1, n=2)
        return CommSystem(Mapcc(machine, int(rng.integers(8, 65))), MapStraight(),
                          Mpsk(2), Awgn(), Awgn())
    q = int(rng.integers(2, 5))
    n = int(rng.integers(1, 33))
    return CommSystem(Uncoded(q, n), MapStraight(), DirectModem(q), Qec(q), Qec(q))


def brute_force_posteriors(codec: Mapcc, R: np.ndarray, app: np.ndarray | None = None):
    """Exact posterior marginals by enumerating every information sequence.

    Independent of the forward-backward path: weights each sequence by the
    product of its per-position channel likelihoods (and priors), then sums.
    """
    N = codec.input_block_size
    out = codec.output_block_size
    seqs = ((np.arange(2 ** N)[:, None] >> np.arange(N)) & 1).astype(np.int64)
    codewords = np.array([codec.encode(SymbolBlock(2, s)).data for s in seqs])
    w = R[np.arange(out), codewords].prod(axis=1)
    if app is not None:
        w = w * app[np.arange(N), seqs].prod(axis=1)
    ri = np.zeros((N, 2))
    ro = np.zeros((out, 2))
    for b in (0, 1):
        ri[:, b] = (w[:, None] * (seqs == b)).sum(axis=0)
        ro[:, b] = (w[:, None] * (codewords == b)).sum(axis=0)
    ri /= ri.sum(axis=1, keepdims=True)
    ro /= ro.sum(axis=1, keepdims=True)
    return ri, ro

"""Channel models: additive noise for signal-space transmission, substitution
and erasure for abstract symbols.

Noise channels interpret the swept parameter as Eb/N0 in dB for unit-energy
constellations: per-dimension variance sigma^2 = 1 / (2 * R * 10^(p/10)),
where R is the system's information bits per channel symbol. Abstract channels
take the parameter directly as an event probability in [0, 1].
"""

from __future__ import annotations

import math

import numpy as np

from .config import Component, ConfigWriter, TokenStream, register
from .core import RandomSource, SymbolBlock

__all__ = ["Channel", "Awgn", "Laplacian", "Qsc", "Qec"]


class Channel(Component):
    """Transmit corruption plus a likelihood kernel for the receive side."""

    category = "channel"
    parameter_kind: str  # "snr" (additive stepping) or "probability" (multiplicative)

    def __init__(self) -> None:
        self._parameter: float | None = None

    @property
    def parameter(self) -> float:
        if self._parameter is None:
            raise RuntimeError("channel parameter not set")
        return self._parameter

    def set_parameter(self, p: float, rate_info: float | None = None) -> None:
        raise NotImplementedError

    def transmit(self, tx, rng: RandomSource):
        raise NotImplementedError

    def likelihood(self, tx, rx) -> float:
        raise NotImplementedError


class _NoiseChannel(Channel):
    """Shared Eb/N0 handling for additive-noise signal channels."""

    parameter_kind = "snr"
    signal_space = True

    def __init__(self) -> None:
        super().__init__()
        self.sigma: float | None = None

    def set_parameter(self, p: float, rate_info: float | None = None) -> None:
        if rate_info is None or rate_info <= 0.0:
            raise ValueError("noise channels need the information rate to map Eb/N0 to sigma")
        if not math.isfinite(p):
            raise ValueError(f"Eb/N0 must be finite, got {p}")
        self._parameter = float(p)
        self.sigma = math.sqrt(1.0 / (2.0 * rate_info * 10.0 ** (p / 10.0)))

    def set_sigma(self, sigma: float) -> None:
        """Directly pin the per-dimension noise deviation (test hook)."""
        if sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        self.sigma = float(sigma)
        self._parameter = float("nan")

    def _need_sigma(self) -> float:
        if self.sigma is None:
            raise RuntimeError("channel parameter not set")
        return self.sigma


@register
class Awgn(_NoiseChannel):
    """Additive white Gaussian noise, independent per I/Q dimension."""

    name = "awgn"

    def transmit(self, tx: np.ndarray, rng: RandomSource) -> np.ndarray:
        sigma = self._need_sigma()
        tx = np.asarray(tx, dtype=np.complex128)
        if sigma == 0.0:
            return tx.copy()
        n = tx.size
        return tx + sigma * (rng.normals(n) + 1j * rng.normals(n))

    def likelihood(self, tx: complex, rx: complex) -> float:
        sigma = self._need_sigma()
        d2 = abs(rx - tx) ** 2
        if sigma == 0.0:
            return 1.0 if d2 == 0.0 else 0.0
        return math.exp(-d2 / (2.0 * sigma * sigma))

    def likelihood_matrix(self, points: np.ndarray, rx: np.ndarray) -> np.ndarray:
        sigma = self._need_sigma()
        d2 = np.abs(rx[:, None] - points[None, :]) ** 2
        d2 -= d2.min(axis=1, keepdims=True)  # row scale only; cancels on normalization
        if sigma == 0.0:
            return (d2 <= 0.0).astype(np.float64)
        return np.exp(-d2 / (2.0 * sigma * sigma))

    def description(self) -> str:
        return "awgn"


@register
class Laplacian(_NoiseChannel):
    """Additive Laplacian noise with per-dimension variance sigma^2 (scale sigma/sqrt(2))."""

    name = "laplacian"

    def transmit(self, tx: np.ndarray, rng: RandomSource) -> np.ndarray:
        sigma = self._need_sigma()
        tx = np.asarray(tx, dtype=np.complex128)
        if sigma == 0.0:
            return tx.copy()
        b = sigma / math.sqrt(2.0)
        n = tx.size
        return tx + rng.laplaces(b, n) + 1j * rng.laplaces(b, n)

    def likelihood(self, tx: complex, rx: complex) -> float:
        sigma = self._need_sigma()
        d = rx - tx
        d1 = abs(d.real) + abs(d.imag)
        if sigma == 0.0:
            return 1.0 if d1 == 0.0 else 0.0
        return math.exp(-d1 * math.sqrt(2.0) / sigma)

    def likelihood_matrix(self, points: np.ndarray, rx: np.ndarray) -> np.ndarray:
        sigma = self._need_sigma()
        d = rx[:, None] - points[None, :]
        d1 = np.abs(d.real) + np.abs(d.imag)
        d1 -= d1.min(axis=1, keepdims=True)
        if sigma == 0.0:
            return (d1 <= 0.0).astype(np.float64)
        return np.exp(-d1 * math.sqrt(2.0) / sigma)

    def description(self) -> str:
        return "laplacian"


class _SymbolChannel(Channel):
    """Shared probability-parameter handling for abstract q-ary channels."""

    parameter_kind = "probability"
    signal_space = False

    def __init__(self, q: int) -> None:
        super().__init__()
        q = int(q)
        if q < 2:
            raise ValueError(f"alphabet size must be >= 2, got {q}")
        self.q = q

    def set_parameter(self, p: float, rate_info: float | None = None) -> None:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"event probability must be in [0, 1], got {p}")
        self._parameter = float(p)

    def _check_tx(self, tx: SymbolBlock) -> None:
        if tx.q != self.q:
            raise ValueError(f"block alphabet {tx.q} does not match channel alphabet {self.q}")

    def write_params(self, w: ConfigWriter) -> None:
        w.field("Alphabet size", self.q)

    @classmethod
    def read_params(cls, ts: TokenStream):
        return cls(ts.next_int("alphabet size"))


@register
class Qsc(_SymbolChannel):
    """q-ary symmetric channel: substitution by a uniformly chosen other symbol."""

    name = "qsc"

    def transmit(self, tx: SymbolBlock, rng: RandomSource) -> SymbolBlock:
        p = self.parameter
        self._check_tx(tx)
        n = len(tx)
        hit = rng.uniforms(n) < p
        offset = 1 + rng.integers(self.q - 1, n)
        out = np.where(hit, (tx.data + offset) % self.q, tx.data)
        return SymbolBlock(self.q, out)

    def likelihood(self, tx: int, rx: int) -> float:
        p = self.parameter
        return 1.0 - p if rx == tx else p / (self.q - 1)

    def symbol_likelihood_table(self, q: int) -> np.ndarray:
        p = self.parameter
        if q != self.q:
            raise ValueError(f"modem alphabet {q} does not match channel alphabet {self.q}")
        kernel = np.full((q, q), p / (q - 1))
        np.fill_diagonal(kernel, 1.0 - p)
        return kernel

    def description(self) -> str:
        return f"qsc(q={self.q})"


@register
class Qec(_SymbolChannel):
    """q-ary erasure channel; erased positions carry the reserved value q.

    The extended output alphabet never leaks past demodulation: the erasure
    row of the likelihood kernel is constant, producing a uniform posterior.
    """

    name = "qec"

    @property
    def erasure(self) -> int:
        return self.q

    def transmit(self, tx: SymbolBlock, rng: RandomSource) -> SymbolBlock:
        p = self.parameter
        self._check_tx(tx)
        hit = rng.uniforms(len(tx)) < p
        out = np.where(hit, self.q, tx.data)
        return SymbolBlock(self.q + 1, out)

    def likelihood(self, tx: int, rx: int) -> float:
        p = self.parameter
        if rx == self.erasure:
            return p
        return 1.0 - p if rx == tx else 0.0

    def symbol_likelihood_table(self, q: int) -> np.ndarray:
        p = self.parameter
        if q != self.q:
            raise ValueError(f"modem alphabet {q} does not match channel alphabet {self.q}")
        kernel = np.zeros((q + 1, q))
        np.fill_diagonal(kernel, 1.0 - p)
        kernel[q, :] = p
        return kernel

    def description(self) -> str:
        return f"qec(q={self.q})"

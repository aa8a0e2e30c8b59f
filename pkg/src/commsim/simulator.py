"""Monte Carlo layer: per-sample simulation, binomial accumulation with
normal-approximation confidence intervals, stop rules, sweeps, and the
human-readable results file shared with the distributed server.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass

import numpy as np

from .commsys import CommSystem
from .config import Component, ConfigWriter, TokenStream, deserialize_component, register
from .core import RandomSource, SymbolBlock, hamming, levenshtein, normal_quantile

__all__ = [
    "SampleResult",
    "Collector",
    "ErrorsHamming",
    "ErrorsLevenshtein",
    "HistSymerr",
    "BinomialAccumulator",
    "StopRule",
    "Floor",
    "converged",
    "measure_states",
    "parameter_values",
    "Simulation",
    "PointRecord",
    "ResultsMeta",
    "format_results",
    "parse_results_rows",
    "AdaptiveBatcher",
    "FixedBatcher",
    "run_until_converged",
    "run_for_duration",
]


@dataclass
class SampleResult:
    """Per-measure error counts and trial counts from one simulated frame."""

    values: np.ndarray
    trials: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.int64)
        self.trials = np.asarray(self.trials, dtype=np.int64)
        if self.values.shape != self.trials.shape or self.values.ndim != 1:
            raise ValueError("values and trials must be equal-length vectors")
        if (self.values < 0).any() or (self.values > self.trials).any():
            raise ValueError("each value must satisfy 0 <= value <= trials")


class Collector(Component):
    """Compares source and decoded frames and emits per-measure counts."""

    category = "collector"

    def labels(self, block_len: int) -> list[str]:
        raise NotImplementedError

    def measure_count(self, block_len: int) -> int:
        return len(self.labels(block_len))

    def collect(self, src: SymbolBlock, dec: SymbolBlock) -> SampleResult:
        raise NotImplementedError


@register
class ErrorsHamming(Collector):
    """Symbol and frame error counts from the Hamming distance."""

    name = "errors_hamming"

    def labels(self, block_len: int) -> list[str]:
        return ["SER", "FER"]

    def collect(self, src: SymbolBlock, dec: SymbolBlock) -> SampleResult:
        d = hamming(src, dec)
        return SampleResult([d, int(d > 0)], [len(src), 1])


@register
class ErrorsLevenshtein(Collector):
    """Hamming-style counts plus a symbol error count under the Levenshtein metric."""

    name = "errors_levenshtein"

    def labels(self, block_len: int) -> list[str]:
        return ["SER", "LSER", "FER"]

    def collect(self, src: SymbolBlock, dec: SymbolBlock) -> SampleResult:
        n = len(src)
        overlap = min(n, len(dec))
        ham = int(np.count_nonzero(src.data[:overlap] != dec.data[:overlap]))
        ham = min(ham + abs(n - len(dec)), n)  # length slippage counts, capped at n
        lev = min(levenshtein(src, dec), n)
        frame = int(ham > 0 or lev > 0 or n != len(dec))
        return SampleResult([ham, lev, frame], [n, n, 1])


@register
class HistSymerr(Collector):
    """Histogram of the per-frame symbol error count (one bin per count 0..N)."""

    name = "hist_symerr"

    def labels(self, block_len: int) -> list[str]:
        return [f"E{i}" for i in range(block_len + 1)]

    def collect(self, src: SymbolBlock, dec: SymbolBlock) -> SampleResult:
        d = hamming(src, dec)
        values = np.zeros(len(src) + 1, dtype=np.int64)
        values[d] = 1
        return SampleResult(values, np.ones(len(src) + 1, dtype=np.int64))


class BinomialAccumulator:
    """Running per-measure (errors, trials) sums with interval estimates.

    Accumulation is associative and order-independent, so partial accumulators
    from concurrent workers or remote clients merge exactly.
    """

    __slots__ = ("errors", "trials", "samples")

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ValueError("need at least one measure")
        self.errors = np.zeros(k, dtype=np.int64)
        self.trials = np.zeros(k, dtype=np.int64)
        self.samples = 0

    @property
    def k(self) -> int:
        return self.errors.size

    @property
    def is_empty(self) -> bool:
        return self.samples == 0

    def accumulate(self, s: SampleResult) -> None:
        self.add_counts(s.values, s.trials, 1)

    def add_counts(self, errors, trials, samples: int) -> None:
        errors = np.asarray(errors, dtype=np.int64)
        trials = np.asarray(trials, dtype=np.int64)
        if errors.shape != (self.k,) or trials.shape != (self.k,):
            raise ValueError(f"measure count mismatch: expected {self.k}")
        self.errors += errors
        self.trials += trials
        self.samples += int(samples)

    def merge(self, other: "BinomialAccumulator") -> None:
        self.add_counts(other.errors, other.trials, other.samples)

    def copy(self) -> "BinomialAccumulator":
        out = BinomialAccumulator(self.k)
        out.merge(self)
        return out

    def estimates(self) -> np.ndarray:
        """Per-measure proportion estimates; NaN where no trials were recorded."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.trials > 0, self.errors / self.trials, np.nan)

    def margins(self, confidence: float) -> np.ndarray:
        """Half-width of the two-sided normal-approximation interval."""
        z = normal_quantile(confidence)
        p = self.estimates()
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.trials > 0, z * np.sqrt(p * (1.0 - p) / self.trials), np.nan)


@dataclass(frozen=True)
class StopRule:
    """Convergence requirements for one sweep point.

    In confidence mode every measure needs at least one error event, the run
    needs ``min_samples`` samples, and each nonzero measure's margin must drop
    to ``relative_error`` times its estimate. In error-events mode every
    measure simply needs ``target_events`` accumulated errors.
    """

    mode: str = "confidence"
    confidence: float = 0.95
    relative_error: float = 0.05
    target_events: int = 100
    min_samples: int = 1000

    def __post_init__(self) -> None:
        if self.mode not in ("confidence", "error_events"):
            raise ValueError(f"unknown stop-rule mode {self.mode!r}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.relative_error <= 0.0:
            raise ValueError("relative error must be positive")
        if self.target_events < 1:
            raise ValueError("error-event target must be >= 1")
        if self.min_samples < 1:
            raise ValueError("minimum sample floor must be >= 1")

    def describe(self) -> str:
        if self.mode == "error_events":
            return f"error-events {self.target_events}"
        return (
            f"confidence {self.confidence!r} relative-error {self.relative_error!r}"
            f" min-samples {self.min_samples}"
        )


@dataclass(frozen=True)
class Floor:
    """Early-stop threshold on converged estimates: 'min' stops the sweep when
    any measure falls below, 'max' only when all do."""

    kind: str
    threshold: float

    def __post_init__(self) -> None:
        if self.kind not in ("min", "max"):
            raise ValueError(f"floor kind must be 'min' or 'max', got {self.kind!r}")
        if self.threshold <= 0.0:
            raise ValueError("floor threshold must be positive")

    def describe(self) -> str:
        return f"{self.kind} {self.threshold!r}"

    def triggers(self, estimates: np.ndarray) -> bool:
        below = estimates < self.threshold
        return bool(below.any()) if self.kind == "min" else bool(below.all())


def _zero_error_upper_bound(trials: int, confidence: float) -> float:
    """Exact binomial upper bound on p after observing zero errors in ``trials``."""
    alpha = (1.0 - confidence) / 2.0
    return 1.0 - alpha ** (1.0 / trials)


def measure_states(acc: BinomialAccumulator, rule: StopRule, floor: Floor | None = None) -> list[str]:
    """Per-measure convergence status: which measure gates progress and why."""
    states = []
    if rule.mode == "error_events":
        for e in acc.errors:
            states.append("converged" if e >= rule.target_events else "needs-events")
        return states
    z = normal_quantile(rule.confidence)
    for e, t in zip(acc.errors, acc.trials):
        if t == 0:
            states.append("no-trials")
        elif e == 0:
            if floor is not None and _zero_error_upper_bound(int(t), rule.confidence) < floor.threshold:
                states.append("below-floor")
            else:
                states.append("no-errors")
        else:
            p = e / t
            delta = z * np.sqrt(p * (1.0 - p) / t)
            states.append("converged" if delta <= rule.relative_error * p else "needs-trials")
    return states


def converged(acc: BinomialAccumulator, rule: StopRule, floor: Floor | None = None) -> bool:
    """True when every measure satisfies the stop rule.

    Zero-error measures block convergence (the normal approximation is
    undefined at zero) unless their exact upper bound already sits below the
    active floor threshold.
    """
    if acc.is_empty:
        return False
    if rule.mode == "error_events":
        return bool((acc.errors >= rule.target_events).all())
    if acc.samples < rule.min_samples:
        return False
    states = measure_states(acc, rule, floor)
    return all(s in ("converged", "below-floor") for s in states)


def parameter_values(start: float, stop: float, step: float, mode: str = "additive") -> list[float]:
    """The sweep's parameter sequence from start toward stop."""
    if mode not in ("additive", "multiplicative"):
        raise ValueError(f"unknown step mode {mode!r}")
    if step <= 0.0:
        raise ValueError("step must be positive")
    values: list[float] = []
    if mode == "additive":
        span = abs(stop - start)
        count = int(np.floor(span / step + 1e-9)) + 1
        sign = 1.0 if stop >= start else -1.0
        values = [start + sign * i * step for i in range(count)]
    else:
        if step == 1.0:
            raise ValueError("multiplicative step must differ from 1")
        if (stop >= start) != (step > 1.0):
            raise ValueError("multiplicative step does not move start toward stop")
        v = start
        eps = 1e-9
        while (v <= stop * (1.0 + eps)) if step > 1.0 else (v >= stop * (1.0 - eps)):
            values.append(v)
            v *= step
    if not values:
        raise ValueError("empty parameter range")
    return values


@register
class Simulation(Component):
    """One simulatable experiment: source spec + collector + communication system."""

    category = "simulator"
    name = "commsys_simulator"

    SOURCE_KINDS = ("random", "all-zero", "user")

    def __init__(
        self,
        collector: Collector,
        system: CommSystem,
        source: str = "random",
        user_sequence: list[int] | None = None,
    ) -> None:
        if source not in self.SOURCE_KINDS:
            raise ValueError(f"source kind must be one of {self.SOURCE_KINDS}, got {source!r}")
        self.collector = collector
        self.system = system
        self.source = source
        if source == "user":
            if user_sequence is None:
                raise ValueError("user source needs an explicit sequence")
            block = SymbolBlock(system.q_in, user_sequence)
            if len(block) != system.input_block_size:
                raise ValueError(
                    f"user sequence length {len(block)} != frame size {system.input_block_size}"
                )
            self.user_sequence = block
        else:
            if user_sequence is not None:
                raise ValueError("user sequence given for a non-user source")
            self.user_sequence = None

    @property
    def measure_count(self) -> int:
        return self.collector.measure_count(self.system.input_block_size)

    @property
    def measure_labels(self) -> list[str]:
        return self.collector.labels(self.system.input_block_size)

    def set_parameter(self, p: float) -> None:
        self.system.set_parameter(p)

    def clone(self) -> "Simulation":
        return copy.deepcopy(self)

    def make_source(self, rng: RandomSource) -> SymbolBlock:
        n, q = self.system.input_block_size, self.system.q_in
        if self.source == "random":
            return SymbolBlock(q, rng.integers(q, n))
        if self.source == "all-zero":
            return SymbolBlock.zeros(q, n)
        return self.user_sequence

    def sample(self, rng: RandomSource) -> SampleResult:
        """Run one frame through the system and collect its error counts."""
        src = self.make_source(rng)
        dec = self.system.cycle(src, rng)
        return self.collector.collect(src, dec)

    def description(self) -> str:
        return f"{self.collector.name}, {self.source} source, {self.system.description()}"

    def write_params(self, w: ConfigWriter) -> None:
        w.child("Results collector", self.collector)
        w.field("Source sequence (random/all-zero/user)", self.source)
        if self.source == "user":
            w.field("User sequence length", len(self.user_sequence))
            w.field_list("User sequence", [int(v) for v in self.user_sequence.data])
        w.child("Communication system", self.system)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "Simulation":
        collector = deserialize_component(ts, "collector")
        source = ts.next("source kind")
        user_sequence = None
        if source == "user":
            count = ts.next_int("user sequence length")
            user_sequence = [ts.next_int("user sequence symbol") for _ in range(count)]
        system = deserialize_component(ts, "system")
        return cls(collector, system, source, user_sequence)


# ---------------------------------------------------------------------------
# results file format (shared with the distributed server and the plot tools)


@dataclass
class PointRecord:
    """Final statistics of one converged (or in-progress) sweep point."""

    parameter: float
    estimates: np.ndarray
    margins: np.ndarray
    errors: np.ndarray
    trials: np.ndarray
    samples: int

    @classmethod
    def from_accumulator(
        cls, parameter: float, acc: BinomialAccumulator, confidence: float
    ) -> "PointRecord":
        return cls(
            parameter=parameter,
            estimates=acc.estimates(),
            margins=acc.margins(confidence),
            errors=acc.errors.copy(),
            trials=acc.trials.copy(),
            samples=acc.samples,
        )


@dataclass
class ResultsMeta:
    """Header block of a results file."""

    digest: str
    date: str
    rule_text: str
    sweep_text: str
    floor_text: str | None
    labels: list[str]
    system_line: str = ""


def _fmt_float(v: float) -> str:
    return repr(float(v))


def format_results(meta: ResultsMeta, rows: list[PointRecord], state_text: str = "") -> str:
    """Render the results file: '#'-commented header, one line per parameter,
    then the optional fully-commented STATE section."""
    lines = ["# communication system simulation results"]
    if meta.system_line:
        lines.append(f"# system: {meta.system_line}")
    lines.append(f"# system-digest: {meta.digest}")
    lines.append(f"# date: {meta.date}")
    lines.append(f"# rule: {meta.rule_text}")
    lines.append(f"# sweep: {meta.sweep_text}")
    if meta.floor_text:
        lines.append(f"# floor: {meta.floor_text}")
    lines.append("# measures: " + " ".join(meta.labels))
    lines.append("# columns: parameter, per measure (estimate margin errors trials), samples")
    for row in rows:
        parts = [_fmt_float(row.parameter)]
        for m in range(len(meta.labels)):
            parts.append(_fmt_float(row.estimates[m]))
            parts.append(_fmt_float(row.margins[m]))
            parts.append(str(int(row.errors[m])))
            parts.append(str(int(row.trials[m])))
        parts.append(str(row.samples))
        lines.append(" ".join(parts))
    text = "\n".join(lines) + "\n"
    if state_text:
        text += state_text
    return text


def parse_results_rows(text: str) -> tuple[list[str], list[PointRecord]]:
    """Read back measure labels and data rows (comments and STATE lines skipped)."""
    labels: list[str] = []
    rows: list[PointRecord] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if stripped.startswith("# measures:"):
                labels = stripped.split(":", 1)[1].split()
            continue
        fields = stripped.split()
        if not labels:
            raise ValueError(f"line {lineno}: data row before the measures header")
        k = len(labels)
        if len(fields) != 2 + 4 * k:
            raise ValueError(f"line {lineno}: expected {2 + 4 * k} fields, got {len(fields)}")
        try:
            param = float(fields[0])
            est = np.array([float(fields[1 + 4 * m]) for m in range(k)])
            mar = np.array([float(fields[2 + 4 * m]) for m in range(k)])
            err = np.array([int(fields[3 + 4 * m]) for m in range(k)], dtype=np.int64)
            tri = np.array([int(fields[4 + 4 * m]) for m in range(k)], dtype=np.int64)
            samples = int(fields[-1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        rows.append(PointRecord(param, est, mar, err, tri, samples))
    return labels, rows


# ---------------------------------------------------------------------------
# local sampling drivers


class FixedBatcher:
    """Constant batch size: stopping points become a pure function of the
    sample stream, which keeps seeded runs reproducible."""

    def __init__(self, batch: int = 100) -> None:
        if batch < 1:
            raise ValueError("batch size must be >= 1")
        self.batch = batch

    def update(self, samples: int, elapsed: float) -> None:
        pass


class AdaptiveBatcher:
    """Sizes sample batches to a wall-clock target between convergence checks."""

    def __init__(self, target_seconds: float = 0.5, max_batch: int = 1_000_000) -> None:
        self.target_seconds = target_seconds
        self.max_batch = max_batch
        self._batch = 1

    @property
    def batch(self) -> int:
        return self._batch

    def update(self, samples: int, elapsed: float) -> None:
        if elapsed <= 0.0:
            self._batch = min(self.max_batch, max(1, samples * 2))
            return
        rate = samples / elapsed
        self._batch = min(self.max_batch, max(1, int(rate * self.target_seconds)))


def _run_batch(sim: Simulation, rng: RandomSource, count: int, acc: BinomialAccumulator) -> None:
    for _ in range(count):
        acc.accumulate(sim.sample(rng))


def run_until_converged(
    sim: Simulation,
    parameter: float,
    rule: StopRule,
    rng: RandomSource,
    floor: Floor | None = None,
    batcher: AdaptiveBatcher | FixedBatcher | None = None,
    max_samples: int | None = None,
) -> BinomialAccumulator:
    """Sample one parameter point until the stop rule is satisfied."""
    sim.set_parameter(parameter)
    acc = BinomialAccumulator(sim.measure_count)
    batcher = batcher or AdaptiveBatcher()
    while not converged(acc, rule, floor):
        n = batcher.batch
        if max_samples is not None:
            n = min(n, max(1, max_samples - acc.samples))
        t0 = time.perf_counter()
        _run_batch(sim, rng, n, acc)
        batcher.update(n, time.perf_counter() - t0)
        if max_samples is not None and acc.samples >= max_samples:
            break
    return acc


def run_for_duration(
    sim: Simulation,
    parameter: float,
    seconds: float,
    rng: RandomSource,
) -> tuple[BinomialAccumulator, float]:
    """Sample one parameter point for roughly ``seconds`` of wall time."""
    if seconds <= 0.0:
        raise ValueError("duration must be positive")
    sim.set_parameter(parameter)
    acc = BinomialAccumulator(sim.measure_count)
    batcher = AdaptiveBatcher()
    start = time.perf_counter()
    while True:
        elapsed = time.perf_counter() - start
        if elapsed >= seconds and not acc.is_empty:
            return acc, elapsed
        t0 = time.perf_counter()
        _run_batch(sim, rng, batcher.batch, acc)
        batcher.update(batcher.batch, time.perf_counter() - t0)

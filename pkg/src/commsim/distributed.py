"""Client-server distributed simulation over TCP.

The server owns the sweep and the accumulators; clients receive the serialized
system, sample under the current parameter, and stream back batched counts.
Result batches are tagged with the epoch of the parameter they were computed
under; batches from a superseded epoch are discarded. The full simulation
state rides in the results file as a '#'-commented STATE section, written
atomically, so a killed server resumes with exact integer counts.

Wire protocol (ASCII lines, LF-framed; SYSTEM is followed by raw bytes):
    HELLO SCS <version>                     both directions
    SYSTEM <nbytes>\\n<raw system text>     server -> client
    PARAM <epoch> <value>                   server -> client
    RESULTS <epoch> <samples> <k> <e1> <t1> ... <ek> <tk>
    IDLE                                    server -> client (no work yet)
    QUIT                                    server -> client
"""

from __future__ import annotations

import hashlib
import os
import select
import socket
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .config import ParseError, deserialize_component
from .core import RandomSource, os_entropy_seed
from .simulator import (
    AdaptiveBatcher,
    BinomialAccumulator,
    Floor,
    PointRecord,
    ResultsMeta,
    Simulation,
    StopRule,
    converged,
    format_results,
)

__all__ = [
    "PROTOCOL_VERSION",
    "NetworkError",
    "ResumeError",
    "system_digest",
    "SimulationState",
    "SweepController",
    "DistributedServer",
    "run_client",
    "run_local_workers",
]

PROTOCOL_VERSION = 1
HELLO_LINE = f"HELLO SCS {PROTOCOL_VERSION}"


class NetworkError(RuntimeError):
    pass


class ResumeError(RuntimeError):
    pass


def system_digest(system_text: str) -> str:
    return hashlib.sha256(system_text.encode()).hexdigest()


@dataclass
class ParamState:
    """Accumulated counts for one sweep parameter."""

    parameter: float
    done: bool
    acc: BinomialAccumulator


@dataclass
class SimulationState:
    """Everything needed to resume a sweep: digest, rule echo, exact counts."""

    digest: str
    created: str
    rule_text: str
    sweep_text: str
    floor_text: str | None
    labels: list[str]
    points: list[ParamState] = field(default_factory=list)

    def state_text(self) -> str:
        lines = ["# STATE"]
        lines.append(f"# digest {self.digest}")
        lines.append(f"# created {self.created}")
        lines.append(f"# rule {self.rule_text}")
        lines.append(f"# sweep {self.sweep_text}")
        if self.floor_text:
            lines.append(f"# floor {self.floor_text}")
        lines.append("# labels " + " ".join(self.labels))
        for ps in self.points:
            parts = [
                "# point",
                repr(ps.parameter),
                str(int(ps.done)),
                str(ps.acc.samples),
                str(ps.acc.k),
            ]
            for e, t in zip(ps.acc.errors, ps.acc.trials):
                parts.append(str(int(e)))
                parts.append(str(int(t)))
            lines.append(" ".join(parts))
        lines.append("# END-STATE")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "SimulationState | None":
        """Extract the STATE section from a results file; None when absent."""
        lines = text.splitlines()
        try:
            start = lines.index("# STATE")
        except ValueError:
            return None
        fields: dict[str, str] = {}
        points: list[ParamState] = []
        ended = False
        for line in lines[start + 1 :]:
            if line == "# END-STATE":
                ended = True
                break
            if not line.startswith("# "):
                raise ResumeError(f"malformed state line: {line!r}")
            body = line[2:]
            key, _, rest = body.partition(" ")
            if key == "point":
                toks = rest.split()
                try:
                    parameter = float(toks[0])
                    done = bool(int(toks[1]))
                    samples = int(toks[2])
                    k = int(toks[3])
                    counts = [int(v) for v in toks[4:]]
                except (IndexError, ValueError) as exc:
                    raise ResumeError(f"malformed state point: {rest!r}") from exc
                if len(counts) != 2 * k:
                    raise ResumeError(f"state point carries {len(counts)} counts, expected {2 * k}")
                acc = BinomialAccumulator(k)
                acc.add_counts(counts[0::2], counts[1::2], samples)
                points.append(ParamState(parameter, done, acc))
            else:
                fields[key] = rest
        if not ended:
            raise ResumeError("state section is truncated")
        for needed in ("digest", "created", "rule", "sweep", "labels"):
            if needed not in fields:
                raise ResumeError(f"state section missing {needed!r}")
        return cls(
            digest=fields["digest"],
            created=fields["created"],
            rule_text=fields["rule"],
            sweep_text=fields["sweep"],
            floor_text=fields.get("floor"),
            labels=fields["labels"].split(),
            points=points,
        )


class SweepController:
    """Owns the sweep position and per-parameter accumulators.

    All mutation happens under one lock; result ingestion is epoch-checked so
    batches computed under a superseded parameter can never contribute.
    """

    def __init__(
        self,
        system_text: str,
        parameters: list[float],
        rule: StopRule,
        labels: list[str],
        floor: Floor | None = None,
        sweep_text: str = "",
        output_path: str | None = None,
        persist_interval: float = 60.0,
        log=None,
    ) -> None:
        self.system_text = system_text
        self.digest = system_digest(system_text)
        self.rule = rule
        self.floor = floor
        self.labels = list(labels)
        self.parameters = list(parameters)
        self.output_path = output_path
        self.persist_interval = persist_interval
        self._log = log or (lambda msg: None)
        self._lock = threading.Lock()
        self._epoch = 0
        self._position = 0
        self._finished = False
        self._last_persist = 0.0
        self._done_event = threading.Event()
        created = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        self.state = SimulationState(
            digest=self.digest,
            created=created,
            rule_text=rule.describe(),
            sweep_text=sweep_text or f"{len(parameters)} points",
            floor_text=floor.describe() if floor else None,
            labels=self.labels,
            points=[
                ParamState(p, False, BinomialAccumulator(len(self.labels)))
                for p in self.parameters
            ],
        )
        self._resumed = False

    # -- resume ------------------------------------------------------------

    def resume_from(self, prior: SimulationState) -> None:
        """Adopt counts from a persisted state after compatibility checks."""
        if prior.digest != self.digest:
            raise ResumeError(
                f"system digest mismatch: state {prior.digest[:12]}... vs current {self.digest[:12]}..."
            )
        if prior.rule_text != self.state.rule_text:
            raise ResumeError(
                f"stop rule mismatch: state {prior.rule_text!r} vs current {self.state.rule_text!r}"
            )
        if prior.labels != self.labels:
            raise ResumeError("measure labels mismatch between state and collector")
        by_param = {repr(ps.parameter): ps for ps in prior.points}
        for ps in self.state.points:
            old = by_param.get(repr(ps.parameter))
            if old is not None:
                ps.acc = old.acc.copy()
                ps.done = old.done
        self.state.created = prior.created
        self._resumed = True
        with self._lock:
            self._skip_done_locked()

    @property
    def resumed(self) -> bool:
        return self._resumed

    # -- sweep state -------------------------------------------------------

    def _skip_done_locked(self) -> None:
        while self._position < len(self.state.points):
            ps = self.state.points[self._position]
            if not ps.done:
                return
            if self.floor is not None and self.floor.triggers(ps.acc.estimates()):
                break
            self._position += 1
        self._finished = True
        self._done_event.set()

    @property
    def finished(self) -> bool:
        with self._lock:
            return self._finished

    def current(self) -> tuple[int, float] | None:
        """(epoch, parameter) of the active point, or None when finished."""
        with self._lock:
            if self._finished:
                return None
            return self._epoch, self.state.points[self._position].parameter

    def progress(self) -> tuple[int, int]:
        with self._lock:
            return self._position, len(self.state.points)

    def ingest(self, epoch: int, samples: int, errors, trials) -> bool:
        """Merge one result batch; returns False for stale or post-finish batches."""
        errors = np.asarray(errors, dtype=np.int64)
        trials = np.asarray(trials, dtype=np.int64)
        with self._lock:
            if self._finished or epoch != self._epoch:
                return False  # stale batch: computed under a superseded parameter
            ps = self.state.points[self._position]
            ps.acc.add_counts(errors, trials, samples)
            if not converged(ps.acc, self.rule, self.floor):
                self._maybe_persist_locked()
                return True
            ps.done = True
            self._log(
                f"parameter {ps.parameter!r} converged after {ps.acc.samples} samples"
            )
            if self.floor is not None and self.floor.triggers(ps.acc.estimates()):
                self._finished = True
                self._done_event.set()
            else:
                self._position += 1
                self._epoch += 1
                self._skip_done_locked()
            self._persist_locked()
            return True

    def wait(self, timeout: float | None = None) -> bool:
        return self._done_event.wait(timeout)

    # -- persistence ---------------------------------------------------------

    def results_rows(self) -> list[PointRecord]:
        rows = []
        for ps in self.state.points:
            if ps.done:
                rows.append(
                    PointRecord.from_accumulator(ps.parameter, ps.acc, self.rule.confidence)
                )
        return rows

    def results_meta(self) -> ResultsMeta:
        return ResultsMeta(
            digest=self.digest,
            date=self.state.created,
            rule_text=self.state.rule_text,
            sweep_text=self.state.sweep_text,
            floor_text=self.state.floor_text,
            labels=self.labels,
        )

    def render(self) -> str:
        return format_results(self.results_meta(), self.results_rows(), self.state.state_text())

    def _persist_locked(self) -> None:
        if not self.output_path:
            return
        text = self.render()
        tmp = f"{self.output_path}.tmp.{os.getpid()}"
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, self.output_path)  # atomic: no truncated state on crash
        self._last_persist = time.monotonic()

    def _maybe_persist_locked(self) -> None:
        if self.output_path and time.monotonic() - self._last_persist >= self.persist_interval:
            self._persist_locked()

    def persist(self) -> None:
        with self._lock:
            self._persist_locked()


# ---------------------------------------------------------------------------
# wire helpers


def _send_line(sock: socket.socket, line: str) -> None:
    sock.sendall(line.encode() + b"\n")


class _SocketReader:
    """Line/byte reader with its own buffer, safe to combine with polling."""

    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock
        self._buf = bytearray()
        self._eof = False

    def poll(self, timeout: float | None) -> bool:
        """True when a complete line is already buffered or data is readable."""
        if b"\n" in self._buf or self._eof:
            return True
        try:
            ready, _, _ = select.select([self._sock], [], [], timeout)
        except OSError:
            return True  # closed socket: let readline report EOF
        return bool(ready)

    def _fill(self) -> bool:
        try:
            chunk = self._sock.recv(65536)
        except OSError:
            chunk = b""
        if not chunk:
            self._eof = True
            return False
        self._buf.extend(chunk)
        return True

    def readline(self) -> str | None:
        while b"\n" not in self._buf:
            if self._eof or not self._fill():
                return None
        idx = self._buf.index(b"\n")
        line = bytes(self._buf[: idx])
        del self._buf[: idx + 1]
        return line.decode().rstrip("\r")

    def read_exact(self, n: int) -> bytes | None:
        while len(self._buf) < n:
            if self._eof or not self._fill():
                return None
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out


def _expect_hello(line: str | None) -> None:
    if line is None:
        raise NetworkError("connection closed during handshake")
    parts = line.split()
    if len(parts) != 3 or parts[0] != "HELLO" or parts[1] != "SCS":
        raise NetworkError(f"malformed handshake line {line!r}")
    if parts[2] != str(PROTOCOL_VERSION):
        raise NetworkError(f"protocol version mismatch: peer {parts[2]}, ours {PROTOCOL_VERSION}")


def _format_results_msg(epoch: int, samples: int, errors, trials) -> str:
    parts = ["RESULTS", str(epoch), str(samples), str(len(errors))]
    for e, t in zip(errors, trials):
        parts.append(str(int(e)))
        parts.append(str(int(t)))
    return " ".join(parts)


def _parse_results_msg(fields: list[str]) -> tuple[int, int, np.ndarray, np.ndarray]:
    epoch, samples, k = int(fields[0]), int(fields[1]), int(fields[2])
    counts = [int(v) for v in fields[3:]]
    if len(counts) != 2 * k:
        raise NetworkError(f"RESULTS carries {len(counts)} counts, expected {2 * k}")
    errors = np.array(counts[0::2], dtype=np.int64)
    trials = np.array(counts[1::2], dtype=np.int64)
    return epoch, samples, errors, trials


# ---------------------------------------------------------------------------
# server


class _ClientSession:
    def __init__(self, sock: socket.socket, addr) -> None:
        self.sock = sock
        self.addr = addr
        self.send_lock = threading.Lock()

    def send(self, line: str) -> None:
        with self.send_lock:
            _send_line(self.sock, line)


class DistributedServer:
    """Accepts clients at any time, ships them the system, aggregates results."""

    def __init__(
        self,
        controller: SweepController,
        host: str = "",
        port: int = 0,
        log=None,
    ) -> None:
        self.controller = controller
        self._log = log or (lambda msg: None)
        try:
            self._listener = socket.create_server((host, port))
        except OSError as exc:
            raise NetworkError(f"cannot listen on port {port}: {exc}") from exc
        self.port = self._listener.getsockname()[1]
        self._sessions: set[_ClientSession] = set()
        self._sessions_lock = threading.Lock()
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()

    def start(self) -> None:
        t = threading.Thread(target=self._accept_loop, name="server-accept", daemon=True)
        t.start()
        self._threads.append(t)
        t = threading.Thread(target=self._persist_loop, name="server-persist", daemon=True)
        t.start()
        self._threads.append(t)

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                ready, _, _ = select.select([self._listener], [], [], 0.2)
            except OSError:
                return
            if not ready:
                continue
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            session = _ClientSession(sock, addr)
            with self._sessions_lock:
                self._sessions.add(session)
            t = threading.Thread(
                target=self._serve_client, args=(session,), name=f"client-{addr}", daemon=True
            )
            t.start()
            self._threads.append(t)

    def _persist_loop(self) -> None:
        interval = max(self.controller.persist_interval, 0.05)
        while not self._stopping.wait(interval):
            self.controller.persist()

    def _serve_client(self, session: _ClientSession) -> None:
        reader = _SocketReader(session.sock)
        try:
            _expect_hello(reader.readline())
            session.send(HELLO_LINE)
            payload = self.controller.system_text.encode()
            with session.send_lock:
                session.sock.sendall(f"SYSTEM {len(payload)}\n".encode() + payload)
            cur = self.controller.current()
            if cur is None:
                session.send("IDLE")
            else:
                session.send(f"PARAM {cur[0]} {cur[1]!r}")
            self._log(f"client {session.addr} joined")
            while not self._stopping.is_set():
                line = reader.readline()
                if line is None:
                    break  # client vanished; roster cleanup below, otherwise unaffected
                fields = line.split()
                if not fields:
                    continue
                if fields[0] == "RESULTS":
                    epoch, samples, errors, trials = _parse_results_msg(fields[1:])
                    before = self.controller.current()
                    self.controller.ingest(epoch, samples, errors, trials)
                    after = self.controller.current()
                    if after != before:
                        self._broadcast_position()
                        if after is None:
                            break
                else:
                    self._log(f"ignoring unexpected message {fields[0]!r} from {session.addr}")
        except (NetworkError, OSError) as exc:
            self._log(f"client {session.addr} dropped: {exc}")
        finally:
            with self._sessions_lock:
                self._sessions.discard(session)
            try:
                session.sock.close()
            except OSError:
                pass
            self._log(f"client {session.addr} left")

    def _broadcast_position(self) -> None:
        cur = self.controller.current()
        line = "QUIT" if cur is None else f"PARAM {cur[0]} {cur[1]!r}"
        with self._sessions_lock:
            sessions = list(self._sessions)
        for session in sessions:
            try:
                session.send(line)
            except OSError:
                pass

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the sweep completes; then notify and drop all clients."""
        finished = self.controller.wait(timeout)
        if finished:
            self.shutdown()
        return finished

    def shutdown(self) -> None:
        if self._stopping.is_set():
            return
        self._broadcast_position()  # QUIT when finished
        self._stopping.set()
        time.sleep(0.05)
        with self._sessions_lock:
            sessions = list(self._sessions)
            self._sessions.clear()
        for session in sessions:
            try:
                session.sock.close()
            except OSError:
                pass
        try:
            self._listener.close()
        except OSError:
            pass
        self.controller.persist()


# ---------------------------------------------------------------------------
# client


def run_client(
    host: str,
    port: int,
    *,
    seed: int | None = None,
    batch_target_seconds: float = 1.0,
    connect_timeout: float = 10.0,
    log=None,
) -> None:
    """Join a server, simulate under its current parameter, stream back counts.

    Returns when the server sends QUIT or the connection is lost; raises
    NetworkError when the server is unreachable or speaks a different version.
    """
    _log = log or (lambda msg: None)
    try:
        sock = socket.create_connection((host, port), timeout=connect_timeout)
    except OSError as exc:
        raise NetworkError(f"cannot reach server at {host}:{port}: {exc}") from exc
    sock.settimeout(None)
    reader = _SocketReader(sock)
    try:
        _send_line(sock, HELLO_LINE)
        _expect_hello(reader.readline())
        header = reader.readline()
        if header is None or not header.startswith("SYSTEM "):
            raise NetworkError(f"expected SYSTEM header, got {header!r}")
        nbytes = int(header.split()[1])
        payload = reader.read_exact(nbytes)
        if payload is None:
            raise NetworkError("connection closed while receiving the system payload")
        try:
            sim = deserialize_component(payload.decode(), "simulator")
        except ParseError as exc:
            raise NetworkError(f"cannot deserialize the received system: {exc}") from exc
        assert isinstance(sim, Simulation)
        rng = RandomSource(os_entropy_seed() if seed is None else seed)
        _log(f"joined {host}:{port}, simulating {sim.description()}")

        epoch: int | None = None
        batcher = AdaptiveBatcher(batch_target_seconds)
        while True:
            # drain control messages; block when there is no work yet
            while reader.poll(None if epoch is None else 0.0):
                line = reader.readline()
                if line is None or line == "QUIT":
                    return
                if line.startswith("PARAM "):
                    fields = line.split()
                    epoch = int(fields[1])
                    sim.set_parameter(float(fields[2]))
                elif line == "IDLE":
                    epoch = None
            if epoch is None:
                continue
            acc = BinomialAccumulator(sim.measure_count)
            t0 = time.perf_counter()
            for _ in range(batcher.batch):
                acc.accumulate(sim.sample(rng))
            batcher.update(batcher.batch, time.perf_counter() - t0)
            try:
                _send_line(sock, _format_results_msg(epoch, acc.samples, acc.errors, acc.trials))
            except OSError:
                return  # server gone: terminate quietly
    finally:
        try:
            sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# in-process variant (no networking)


def run_local_workers(
    controller: SweepController,
    sim: Simulation,
    workers: int = 1,
    master_seed: int | None = None,
    batch_target_seconds: float = 0.5,
) -> None:
    """Drive the controller with in-process sampling threads instead of sockets."""
    if workers < 1:
        raise ValueError("need at least one worker")
    master = RandomSource(os_entropy_seed() if master_seed is None else master_seed)

    def work(worker_sim: Simulation, rng: RandomSource) -> None:
        batcher = AdaptiveBatcher(batch_target_seconds)
        current: tuple[int, float] | None = None
        while True:
            cur = controller.current()
            if cur is None:
                return
            if cur != current:
                current = cur
                worker_sim.set_parameter(cur[1])
            acc = BinomialAccumulator(worker_sim.measure_count)
            t0 = time.perf_counter()
            for _ in range(batcher.batch):
                acc.accumulate(worker_sim.sample(rng))
            batcher.update(batcher.batch, time.perf_counter() - t0)
            controller.ingest(cur[0], acc.samples, acc.errors, acc.trials)

    threads = []
    for _ in range(workers):
        t = threading.Thread(target=work, args=(sim.clone(), master.spawn()), daemon=True)
        t.start()
        threads.append(t)
    for t in threads:
        t.join()
    controller.persist()

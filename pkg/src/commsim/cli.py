"""Command-line front end: quick bounded-time runs, sweep server, and client.

One multiplexed binary with subcommands; the historical per-binary names are
accepted as subcommand aliases. Exit codes: 0 success, 1 usage, 2 config or
parse failure, 3 network failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import math
import sys

from .config import ParseError, deserialize_component, serialize_component
from .core import RandomSource, os_entropy_seed
from .distributed import (
    DistributedServer,
    NetworkError,
    ResumeError,
    SimulationState,
    SweepController,
    run_client,
    run_local_workers,
)
from .simulator import Floor, Simulation, StopRule, parameter_values, run_for_duration

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NETWORK = 3
EXIT_INTERNAL = 4

_QUICKSIM_ALIASES = ("quicksimulation", "quicksimulation.master.release")
_FULLSIM_ALIASES = ("simcommsys", "simcommsys.master.release")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="commsim", description="communication system simulator")
    sub = parser.add_subparsers(dest="command", metavar="command")

    qs = sub.add_parser("quicksim", aliases=list(_QUICKSIM_ALIASES),
                        help="bounded-time local simulation at one parameter")
    qs.add_argument("-i", dest="input", required=True, metavar="FILE",
                    help="system configuration file")
    qs.add_argument("-r", dest="parameter", required=True, type=float,
                    help="channel parameter (e.g. Eb/N0 in dB)")
    qs.add_argument("-t", dest="seconds", required=True, type=float,
                    help="wall-clock duration in seconds")
    qs.add_argument("--confidence", type=float, default=0.95,
                    help="confidence level for the reported margins")
    qs.add_argument("--seed", type=int, default=None, help="random seed (default: OS entropy)")
    qs.set_defaults(func=cmd_quicksim)

    sim = sub.add_parser("simulate", help="full parameter sweep (server or local workers)")
    sim.add_argument("-i", dest="input", required=True, metavar="FILE",
                     help="system configuration file")
    sim.add_argument("-o", dest="output", required=True, metavar="FILE",
                     help="results/state file (resumed when compatible)")
    sim.add_argument("-e", dest="endpoint", default=None, metavar=":PORT",
                     help="listen for clients on this port")
    sim.add_argument("--local-workers", type=int, default=None, metavar="N",
                     help="run without networking using N in-process workers")
    sim.add_argument("--start", type=float, required=True, help="first parameter value")
    sim.add_argument("--stop", type=float, required=True, help="last parameter value")
    sim.add_argument("--step", type=float, required=True, help="parameter step factor")
    sim.add_argument("--mul-step", action="store_true",
                     help="apply the step multiplicatively instead of additively")
    sim.add_argument("--floor-min", type=float, default=None,
                     help="stop the sweep when any measure falls below this rate")
    sim.add_argument("--floor-max", type=float, default=None,
                     help="stop the sweep when all measures fall below this rate")
    sim.add_argument("--confidence", type=float, default=None,
                     help="confidence level of the stopping interval")
    sim.add_argument("--relative-error", type=float, default=None,
                     help="stop when the margin shrinks to this fraction of the estimate")
    sim.add_argument("--error-events", type=int, default=None,
                     help="stop each point after this many error events per measure")
    sim.add_argument("--min-samples", type=int, default=1000,
                     help="minimum samples per point in confidence mode")
    sim.add_argument("--persist-interval", type=float, default=60.0,
                     help="seconds between state snapshots")
    sim.add_argument("--seed", type=int, default=None,
                     help="master seed for local workers (default: OS entropy)")
    sim.set_defaults(func=cmd_simulate)

    cl = sub.add_parser("client", help="join a running simulation server")
    cl.add_argument("-e", dest="endpoint", required=True, metavar="HOST:PORT",
                    help="server address")
    cl.add_argument("--seed", type=int, default=None, help="random seed (default: OS entropy)")
    cl.set_defaults(func=cmd_client)

    return parser


def _translate_alias_argv(argv: list[str]) -> list[str]:
    """Map historical binary names to subcommands; the full-simulator name
    dispatches on whether a system file is given (server) or not (client)."""
    if not argv:
        return argv
    head, rest = argv[0], argv[1:]
    if head in _QUICKSIM_ALIASES:
        return ["quicksim"] + rest
    if head in _FULLSIM_ALIASES:
        return (["simulate"] if "-i" in rest else ["client"]) + rest
    return argv


def _load_simulation(path: str) -> Simulation:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read system file {path!r}: {exc}") from exc
    sim = deserialize_component(text, "simulator")
    if not isinstance(sim, Simulation):
        raise ParseError(f"{path!r} does not describe a simulation")
    return sim


def cmd_quicksim(args) -> int:
    if args.seconds <= 0.0:
        raise UsageError("-t must be a positive duration")
    if not 0.0 < args.confidence < 1.0:
        raise UsageError("--confidence must be in (0, 1)")
    sim = _load_simulation(args.input)
    rng = RandomSource(os_entropy_seed() if args.seed is None else args.seed)
    acc, elapsed = run_for_duration(sim, args.parameter, args.seconds, rng)

    frames_per_s = acc.samples / elapsed
    info_bits = sim.system.input_block_size * math.log2(sim.system.q_in)
    print(f"# quick simulation: {sim.description()}")
    print(f"# parameter: {args.parameter!r}")
    print(f"# frames: {acc.samples} of {sim.system.input_block_size} symbols "
          f"in {elapsed:.2f} s")
    print(f"# frames/s: {frames_per_s:.4g}")
    print(f"# information bit/s: {frames_per_s * info_bits:.4g}")
    estimates = acc.estimates()
    margins = acc.margins(args.confidence)
    print(f"# measure estimate margin({args.confidence:g}) errors trials")
    for label, est, mar, e, t in zip(sim.measure_labels, estimates, margins,
                                     acc.errors, acc.trials):
        print(f"{label} {est:.6g} {mar:.3g} {int(e)} {int(t)}")
    return EXIT_OK


def _build_stop_rule(args) -> StopRule:
    confidence_given = args.confidence is not None or args.relative_error is not None
    if args.error_events is not None and confidence_given:
        raise UsageError("give either --error-events or --confidence/--relative-error, not both")
    if args.error_events is not None:
        if args.error_events < 1:
            raise UsageError("--error-events must be >= 1")
        return StopRule(mode="error_events", target_events=args.error_events)
    if args.confidence is None or args.relative_error is None:
        raise UsageError("confidence mode needs both --confidence and --relative-error")
    if not 0.0 < args.confidence < 1.0:
        raise UsageError("--confidence must be in (0, 1)")
    if args.relative_error <= 0.0:
        raise UsageError("--relative-error must be positive")
    if args.min_samples < 1:
        raise UsageError("--min-samples must be >= 1")
    return StopRule(
        mode="confidence",
        confidence=args.confidence,
        relative_error=args.relative_error,
        min_samples=args.min_samples,
    )


def _parse_listen_endpoint(endpoint: str) -> int:
    host, sep, port = endpoint.rpartition(":")
    if not sep or host not in ("", "0.0.0.0", "::", "localhost", "127.0.0.1"):
        raise UsageError(f"server endpoint must look like :PORT, got {endpoint!r}")
    try:
        return int(port)
    except ValueError:
        raise UsageError(f"invalid port in endpoint {endpoint!r}") from None


def cmd_simulate(args) -> int:
    if (args.endpoint is None) == (args.local_workers is None):
        raise UsageError("give exactly one of -e :PORT or --local-workers N")
    if args.local_workers is not None and args.local_workers < 1:
        raise UsageError("--local-workers must be >= 1")
    if args.floor_min is not None and args.floor_max is not None:
        raise UsageError("give at most one of --floor-min and --floor-max")
    rule = _build_stop_rule(args)
    floor = None
    if args.floor_min is not None:
        floor = Floor("min", args.floor_min)
    elif args.floor_max is not None:
        floor = Floor("max", args.floor_max)

    mode = "multiplicative" if args.mul_step else "additive"
    try:
        params = parameter_values(args.start, args.stop, args.step, mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    sim = _load_simulation(args.input)
    system_text = serialize_component(sim)  # canonical form: digest and wire payload
    controller = SweepController(
        system_text=system_text,
        parameters=params,
        rule=rule,
        labels=sim.measure_labels,
        floor=floor,
        sweep_text=f"{mode} start {args.start!r} stop {args.stop!r} step {args.step!r}",
        output_path=args.output,
        persist_interval=args.persist_interval,
        log=lambda msg: print(f"# {msg}", flush=True),
    )

    prior = None
    try:
        with open(args.output) as fh:
            prior = SimulationState.parse(fh.read())
    except FileNotFoundError:
        pass
    if prior is not None:
        controller.resume_from(prior)
        pos, total = controller.progress()
        print(f"# resuming from saved state at parameter position {pos + 1}/{total}", flush=True)

    if controller.finished:
        controller.persist()
        print(f"# sweep already complete; results in {args.output}", flush=True)
        return EXIT_OK

    if args.endpoint is not None:
        port = _parse_listen_endpoint(args.endpoint)
        server = DistributedServer(controller, port=port, log=lambda msg: print(f"# {msg}", flush=True))
        server.start()
        print(f"# listening on port {server.port}", flush=True)
        server.wait()
    else:
        run_local_workers(controller, sim, args.local_workers, master_seed=args.seed)
    controller.persist()
    print(f"# sweep finished; results in {args.output}", flush=True)
    return EXIT_OK


def cmd_client(args) -> int:
    host, sep, port_text = args.endpoint.rpartition(":")
    if not sep or not host:
        raise UsageError(f"client endpoint must look like HOST:PORT, got {args.endpoint!r}")
    try:
        port = int(port_text)
    except ValueError:
        raise UsageError(f"invalid port in endpoint {args.endpoint!r}") from None
    run_client(host, port, seed=args.seed)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _translate_alias_argv(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError("a subcommand is required (quicksim, simulate, client)")
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ResumeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NetworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

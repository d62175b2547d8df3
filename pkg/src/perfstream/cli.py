"""Command-line entry point: serve, gen, replay, and bench modes.

Every flag can also be supplied through an environment variable named
``PERFSTREAM_<FLAG>`` (uppercase, dashes as underscores); explicit flags
win. Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import socket
import sys

from .bench import format_report, run_suite
from .engine import SessionState
from .generator import Scenario, generate, replay
from .server import AnalysisPipeline, StreamServer

logger = logging.getLogger("perfstream")

ENV_PREFIX = "PERFSTREAM_"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _env_default(flag: str, fallback):
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"), fallback)


def build_parser() -> _Parser:
    parser = _Parser(prog="perfstream", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)

    serve = sub.add_parser("serve", help="run ingest + analysis + WebSocket endpoint")
    serve.add_argument("--port", type=int, default=int(_env_default("port", 8765)),
                       help="WebSocket port (0 = ephemeral)")
    serve.add_argument("--ingest", default=_env_default("ingest", "tcp://:9009"),
                       help="tcp://[host]:port to listen on, a file path, or '-' for stdin")
    serve.add_argument("--window", type=int, default=int(_env_default("window", 64)),
                       help="sliding window capacity in slices")
    serve.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    serve.add_argument("--alpha", type=float, default=float(_env_default("alpha", 0.01)),
                       help="change-detector significance level")
    serve.add_argument("--k", type=int, default=int(_env_default("k", 3)),
                       help="cluster count")
    serve.add_argument("--cluster-ms", type=float,
                       default=float(_env_default("cluster-ms", 50.0)))
    serve.add_argument("--dr-ms", type=float, default=float(_env_default("dr-ms", 1.0)))
    serve.add_argument("--var-ms", type=float, default=float(_env_default("var-ms", 100.0)))
    serve.add_argument("--cadence", type=int, default=int(_env_default("cadence", 5)),
                       help="causality refit cadence in ticks")
    serve.add_argument("--p-threshold", type=float,
                       default=float(_env_default("p-threshold", 0.05)))
    serve.add_argument("--direction", choices=("from", "to"),
                       default=_env_default("direction", "from"))
    serve.add_argument("--top-metric", type=int, default=int(_env_default("top-metric", 0)))
    serve.add_argument("--bottom-metric", type=int,
                       default=int(_env_default("bottom-metric", 1)))
    serve.add_argument("--cluster-metric", type=int,
                       default=_env_default("cluster-metric", None),
                       help="metric to cluster by (default: follow the top metric)")
    serve.add_argument("--cpd-bottom", action="store_true",
                       default=_env_default("cpd-bottom", "") not in ("", "0", "false"))
    serve.add_argument("--ir-horizon", type=int, default=int(_env_default("ir-horizon", 10)))
    serve.add_argument("--var-lag", type=int, default=int(_env_default("var-lag", 1)))
    serve.add_argument("--aggregation-level", type=int,
                       default=int(_env_default("aggregation-level", 0)))
    serve.add_argument("--log-level", default=_env_default("log-level", "INFO"))

    gen = sub.add_parser("gen", help="emit a synthetic telemetry stream")
    gen.add_argument("--scenario", help="scenario JSON file (defaults built in)")
    gen.add_argument("--preset", choices=("default", "causal"), default="default",
                     help="built-in scenario preset when no file is given")
    gen.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    gen.add_argument("--interval", type=float, default=None, help="slice interval in ms")
    gen.add_argument("--duration", type=int, default=None, help="slices to emit")
    gen.add_argument("--pes", type=int, default=None)
    gen.add_argument("--kps", type=int, default=None, help="KPs per PE")
    gen.add_argument("--out", default="stdout",
                     help="stdout, a file path, or tcp://host:port to connect to")
    gen.add_argument("--no-throttle", action="store_true", help="emit at full speed")
    gen.add_argument("--log-level", default=_env_default("log-level", "INFO"))

    rep = sub.add_parser("replay", help="re-emit a recorded stream")
    rep.add_argument("file")
    rep.add_argument("--speed", type=float, default=1.0,
                     help="timing multiplier (0 = max speed)")
    rep.add_argument("--out", default="stdout")
    rep.add_argument("--log-level", default=_env_default("log-level", "INFO"))

    bench = sub.add_parser("bench", help="run the performance benchmark suites")
    bench.add_argument("--suite", default="table1",
                       choices=("table1", "cpd", "clustering", "dr", "var", "tick"))
    bench.add_argument("--n", type=int, default=int(_env_default("bench-n", 2000)),
                       help="entity count for clustering/DR tables")
    bench.add_argument("--slices", type=int, default=int(_env_default("bench-slices", 1000)),
                       help="slices per CPD measurement")
    bench.add_argument("--budget-ms", type=float, default=1000.0,
                       help="latency envelope per progressive refresh")
    bench.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    bench.add_argument("--out", help="write the JSON report here as well")
    bench.add_argument("--log-level", default=_env_default("log-level", "INFO"))
    return parser


def _validate_serve(args) -> SessionState:
    if not 0.0 <= args.alpha <= 1.0:
        raise ConfigError(f"alpha must satisfy 0 <= alpha <= 1 (got {args.alpha})")
    if args.k < 1:
        raise ConfigError(f"k must satisfy k >= 1 (got {args.k})")
    for name in ("cluster_ms", "dr_ms", "var_ms"):
        if getattr(args, name) <= 0:
            raise ConfigError(f"{name.replace('_', '-')} must be > 0")
    if args.cadence < 1:
        raise ConfigError("cadence must be >= 1")
    if args.window < 1:
        raise ConfigError("window must be >= 1")
    if not 1 <= args.var_lag <= 4:
        raise ConfigError("var-lag must be in [1, 4]")
    if args.ir_horizon < 1:
        raise ConfigError("ir-horizon must be >= 1")
    cluster_metric = args.cluster_metric
    if cluster_metric is not None:
        cluster_metric = int(cluster_metric)
    return SessionState(
        top_metric=args.top_metric,
        bottom_metric=args.bottom_metric,
        cluster_metric=cluster_metric,
        k=args.k,
        alpha=args.alpha,
        cpd_bottom=args.cpd_bottom,
        cluster_budget=args.cluster_ms / 1e3,
        dr_budget=args.dr_ms / 1e3,
        var_budget=args.var_ms / 1e3,
        causality_cadence=args.cadence,
        causality_direction=args.direction,
        p_threshold=args.p_threshold,
        ir_horizon=args.ir_horizon,
        var_lag=args.var_lag,
        aggregation_level=args.aggregation_level,
    )


def _parse_tcp(spec: str) -> tuple[str, int]:
    rest = spec[len("tcp://"):]
    host, _, port = rest.rpartition(":")
    if not port.isdigit():
        raise ConfigError(f"bad tcp endpoint {spec!r}")
    return host or "127.0.0.1", int(port)


def _make_sink(out: str):
    """Returns (sink, closer) writing one line per call."""
    if out == "stdout":
        return (lambda line: print(line, flush=False)), (lambda: None)
    if out.startswith("tcp://"):
        host, port = _parse_tcp(out)
        conn = socket.create_connection((host, port))
        return (
            lambda line: conn.sendall(line.encode("utf-8") + b"\n"),
            conn.close,
        )
    handle = open(out, "w", encoding="utf-8")
    return (lambda line: handle.write(line + "\n")), handle.close


def _load_scenario(args) -> Scenario:
    if args.scenario:
        try:
            with open(args.scenario, "r", encoding="utf-8") as fh:
                scenario = Scenario.from_json(fh.read())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad scenario file: {exc}") from exc
    elif args.preset == "causal":
        scenario = Scenario(
            ar1={"Net.Send.": (0.7, 6.0)},
            coupling=("Net.Send.", "Sec.Rb.", 0.8, 1),
            events=[{"type": "level_shift", "t": 150, "metric": "Sec.Rb.",
                     "group": 2, "delta": 12.0}],
        )
    else:
        scenario = Scenario()
    if args.seed is not None:
        scenario.seed = args.seed
    if args.interval is not None:
        scenario.interval = args.interval / 1e3
    if args.duration is not None:
        scenario.duration = args.duration
    if args.pes is not None:
        scenario.pes = args.pes
    if args.kps is not None:
        scenario.kps_per_pe = args.kps
    try:
        scenario.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return scenario


async def _serve(args) -> int:
    session = _validate_serve(args)
    pipeline = AnalysisPipeline(session=session, seed=args.seed, window_capacity=args.window)
    ingest_port = None
    ingest_file = None
    if args.ingest.startswith("tcp://"):
        _, ingest_port = _parse_tcp(args.ingest)
    else:
        ingest_file = args.ingest
    server = StreamServer(
        pipeline, port=args.port, ingest_port=ingest_port, ingest_file=ingest_file
    )
    await server.start()
    print(json.dumps({"ws_port": server.port, "ingest_port": server.ingest_port}), flush=True)
    logger.info(
        "config: %s",
        json.dumps({k: v for k, v in vars(args).items() if k != "mode"}, sort_keys=True),
    )
    try:
        await asyncio.Event().wait()
    except asyncio.CancelledError:
        pass
    finally:
        await server.stop()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    logging.basicConfig(
        level=getattr(logging, str(getattr(args, "log_level", "INFO")).upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    try:
        if args.mode == "serve":
            return asyncio.run(_serve(args))
        if args.mode == "gen":
            scenario = _load_scenario(args)
            logger.info(
                "config: %s",
                json.dumps({k: v for k, v in vars(args).items() if k != "mode"}, sort_keys=True),
            )
            logger.info("scenario: seed=%d n=%d duration=%d interval=%.3fs",
                        scenario.seed, scenario.n, scenario.duration, scenario.interval)
            sink, closer = _make_sink(args.out)
            try:
                count = generate(scenario, sink, throttle=not args.no_throttle)
            finally:
                closer()
            logger.info("emitted %d lines", count)
            return 0
        if args.mode == "replay":
            if args.speed < 0:
                raise ConfigError("speed must be >= 0")
            if not os.path.exists(args.file):
                raise ConfigError(f"no such file: {args.file}")
            sink, closer = _make_sink(args.out)
            try:
                emitted, skipped = replay(args.file, args.speed, sink)
            finally:
                closer()
            logger.info("replayed %d lines (%d skipped)", emitted, skipped)
            return 0
        if args.mode == "bench":
            report = run_suite(
                suite=args.suite,
                cpd_slices=args.slices,
                n=args.n,
                budget=args.budget_ms / 1e3,
                seed=args.seed,
            )
            text = format_report(report)
            print(text)
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text + "\n")
            return 0 if report["trends_ok"] else 2
        raise ConfigError(f"unknown mode {args.mode!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # runtime failure
        logger.exception("runtime error")
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""
SEC-NoSQL command line.

Subcommands:
  up / status / down          supervise a topology (state file under --state-dir)
  serve-node / serve-proxy    run one component in the foreground
  load / run                  one-off load and run phases on a fresh topology
  sweep                       (p, n) grid, writes the bench CSV
  fit / report                SLA surfaces and offer tables
"""

import argparse
import dataclasses
import json
import logging
import os
import signal
import sys
import threading
import time
from pathlib import Path
from typing import List, Optional, Sequence

from .bench import average_samples, load_phase, read_csv, run_phase, sweep, write_csv
from .core import (
    WORKLOAD_PRESETS,
    AppConfig,
    BenchCorrectnessError,
    ConfigError,
    DeploymentModel,
    FitError,
    MasterKey,
    ModelKind,
    NodeId,
    RunMode,
    SecNoSqlError,
)
from .proxy import serve_proxy
from .services import ConfigSerializer, Settings, Topology
from .services.topology import clear_state, probe, read_state, state_endpoints, wait_until_closed, write_state
from .sla import fit_from_samples, load_models, render_csv, render_text, save_models, sla_table
from .store import serve_node

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_CORRECTNESS = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


# ========== arguments ==========

def int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--model", help="NoEnc, EncM1, EncM2 or EncM3")
    common.add_argument("--nodes", type=int, help="Storage node count")
    common.add_argument("--proxies", type=int_list, help="Proxy count, or comma list for sweep/report")
    common.add_argument("--clients", type=int_list, help="Client sessions, comma list")
    common.add_argument("--reps", type=int, help="Repetitions per grid cell")
    common.add_argument("--workload", choices=sorted(WORKLOAD_PRESETS), help="Read/update mix preset")
    common.add_argument("--read-prop", type=float, help="Read proportion in [0, 1]")
    common.add_argument("--records", type=int, help="Records loaded before running")
    common.add_argument("--ops", type=int, help="Operations per run phase")
    common.add_argument("--seed", type=int, help="Workload seed")
    common.add_argument("--out", help="Output file")
    common.add_argument("--input", type=Path, help="Bench CSV for fit, coefficients JSON for report")
    common.add_argument("--mode", choices=[m.value for m in RunMode], help="Deployment mode")
    common.add_argument("--service-delay-us", type=int, help="Per-operation coordinator delay")
    common.add_argument("--workers", type=int, help="Worker pool size per proxy")
    common.add_argument("--state-dir", type=Path, help="Where up/status/down keep their state file")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="secnosql", description="Security-as-a-Service proxy for a NoSQL cluster")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("up", parents=[common], help="Start a topology and block until signalled")
    commands.add_parser("status", parents=[common], help="Show the running topology")
    commands.add_parser("down", parents=[common], help="Stop the running topology")
    serve_node_cmd = commands.add_parser("serve-node", parents=[common], help="Run one storage node")
    serve_node_cmd.add_argument("--node-index", type=int, required=True)
    serve_node_cmd.add_argument("--port", type=int, help="Listen port (default base_port + index)")
    serve_proxy_cmd = commands.add_parser("serve-proxy", parents=[common], help="Run one proxy")
    serve_proxy_cmd.add_argument("--proxy-index", type=int, default=0)
    serve_proxy_cmd.add_argument("--port", type=int, help="Listen port (default base_port + 100 + index)")
    commands.add_parser("load", parents=[common], help="Load records into a fresh topology")
    commands.add_parser("run", parents=[common], help="Load, then one run phase per client count")
    commands.add_parser("sweep", parents=[common], help="Benchmark grid, writes the bench CSV")
    commands.add_parser("fit", parents=[common], help="Fit SLA surfaces from a bench CSV")
    commands.add_parser("report", parents=[common], help="SLA offer table from fitted coefficients")
    return parser


def load_config(args: argparse.Namespace) -> AppConfig:
    """Defaults, then the config file, then flags."""
    config = ConfigSerializer.load_from_file(args.config) if args.config else AppConfig()

    deployment = config.deployment
    if args.model:
        try:
            kind = ModelKind.parse(args.model)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if kind is not deployment.kind:
            deployment = DeploymentModel.for_kind(kind, deployment.node_count)
    if args.nodes is not None:
        deployment.node_count = args.nodes
        deployment.replication_factor = min(deployment.replication_factor, max(args.nodes, 1))
    if args.proxies and args.command not in ("sweep", "report"):
        deployment.proxy_count = args.proxies[0]
    config.deployment = deployment

    workload = config.workload
    if args.workload:
        workload.read_proportion = WORKLOAD_PRESETS[args.workload]
    if args.read_prop is not None:
        workload.read_proportion = args.read_prop
    if args.records is not None:
        workload.record_count = args.records
    if args.ops is not None:
        workload.operation_count = args.ops

    bench = config.bench
    if args.clients:
        bench.clients = args.clients
    if args.proxies:
        bench.proxies = args.proxies
    if args.reps is not None:
        bench.repetitions = args.reps
    if args.seed is not None:
        bench.seed = args.seed
    if args.out:
        bench.out = args.out

    if args.mode:
        config.mode = RunMode(args.mode)
    if args.service_delay_us is not None:
        config.service_delay_us = args.service_delay_us
    if args.workers is not None:
        config.proxy_workers = args.workers
    return config


def resolve_master(settings: Settings, config: AppConfig, kind: Optional[ModelKind] = None) -> Optional[MasterKey]:
    kind = kind or config.deployment.kind
    return settings.master_key(config.master_key_file, required=kind.encrypted)


def wait_for_signal() -> None:
    """Block until SIGINT or SIGTERM."""
    stop = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, lambda *_: stop.set())
    while not stop.is_set():
        stop.wait(0.5)


# ========== commands ==========

def cmd_up(args, config: AppConfig, settings: Settings) -> int:
    state_dir = args.state_dir or settings.get_state_dir()
    if read_state(state_dir):
        raise ConfigError(f"A topology is already recorded in {state_dir}; run down first")
    if config.mode is RunMode.LOCAL:
        logger.info("[CLI] Local mode exposes no endpoints; serving over TCP")
        config = dataclasses.replace(config, mode=RunMode.TCP)
    with Topology(config, resolve_master(settings, config)) as topology:
        path = write_state(state_dir, topology)
        print(json.dumps(topology.status(), indent=2))
        logger.info(f"[CLI] State written to {path}; waiting for down")
        try:
            wait_for_signal()
        finally:
            clear_state(state_dir)
    return EXIT_OK


def cmd_status(args, config: AppConfig, settings: Settings) -> int:
    state_dir = args.state_dir or settings.get_state_dir()
    state = read_state(state_dir)
    if state is None:
        print("No topology running")
        return EXIT_ERROR
    for entry in state.get("nodes", []) + state.get("proxies", []):
        endpoint = entry.get("endpoint")
        if endpoint and endpoint != "in-process":
            host, _, port = endpoint.rpartition(":")
            entry["listening"] = probe(host, int(port))
    print(json.dumps(state, indent=2))
    return EXIT_OK


def cmd_down(args, config: AppConfig, settings: Settings) -> int:
    state_dir = args.state_dir or settings.get_state_dir()
    state = read_state(state_dir)
    if state is None:
        print("No topology running")
        return EXIT_OK
    pid = state.get("pid")
    try:
        os.kill(pid, signal.SIGTERM)
    except (ProcessLookupError, TypeError):
        logger.warning(f"[CLI] Supervisor {pid} is gone")
    remaining = [ep for ep in state_endpoints(state) if not wait_until_closed(*ep, timeout=15.0)]
    # the supervisor removes its own state file; a stale one is cleared here
    deadline = time.monotonic() + 5.0
    while read_state(state_dir) is not None and time.monotonic() < deadline:
        time.sleep(0.1)
    clear_state(state_dir)
    if remaining:
        logger.error(f"[CLI] Still listening: {', '.join(f'{h}:{p}' for h, p in remaining)}")
        return EXIT_ERROR
    print("Topology stopped")
    return EXIT_OK


def _node_endpoints(config: AppConfig):
    return [(config.host, config.base_port + i) for i in range(config.deployment.node_count)]


def cmd_serve_node(args, config: AppConfig, settings: Settings) -> int:
    endpoints = _node_endpoints(config)
    if not 0 <= args.node_index < len(endpoints):
        raise ConfigError(f"--node-index must be in [0, {len(endpoints)})")
    if args.port is not None:
        endpoints[args.node_index] = (config.host, args.port)
    serve_node(args.node_index, endpoints, config.deployment.replication_factor, config.service_delay_us)
    return EXIT_OK


def cmd_serve_proxy(args, config: AppConfig, settings: Settings) -> int:
    if not config.deployment.kind.encrypted:
        raise ConfigError("NoEnc deployments have no proxy")
    topology = Topology(config)
    port = args.port if args.port is not None else config.base_port + 100 + args.proxy_index
    proxy_config = topology.proxy_config(args.proxy_index, port)
    node_map = {NodeId(i): ep for i, ep in enumerate(_node_endpoints(config))}
    serve_proxy(proxy_config, resolve_master(settings, config), node_map)
    return EXIT_OK


def cmd_load(args, config: AppConfig, settings: Settings) -> int:
    with Topology(config, resolve_master(settings, config)) as topology:
        expected = load_phase(config.workload, topology, seed=config.bench.seed)
    print(f"Loaded {len(expected)} cells")
    return EXIT_OK


def cmd_run(args, config: AppConfig, settings: Settings) -> int:
    samples = []
    with Topology(config, resolve_master(settings, config)) as topology:
        expected = load_phase(config.workload, topology, seed=config.bench.seed)
        for n in config.bench.clients:
            samples.append(run_phase(config.workload, n, topology, expected, seed=config.bench.seed + n))
    if args.out:
        write_csv(samples, args.out)
    for s in samples:
        print(
            f"n={s.clients}: {s.throughput:.1f} ops/sec, read {s.read_latency_avg:.1f} us, "
            f"write {s.write_latency_avg:.1f} us, errors {s.error_count}"
        )
    return EXIT_OK


def cmd_sweep(args, config: AppConfig, settings: Settings) -> int:
    kind = config.deployment.kind
    bench = config.bench
    samples = sweep(
        config,
        resolve_master(settings, config, kind),
        kind,
        bench.clients,
        bench.proxies,
        bench.repetitions,
    )
    rows = write_csv(samples, bench.out)
    for cell in average_samples(samples):
        print(
            f"{cell.model.value} p={cell.proxies} n={cell.clients}: "
            f"{cell.throughput:.1f} ops/s over {cell.repetition} runs, "
            f"read {cell.read_latency_avg:.0f} us, write {cell.write_latency_avg:.0f} us"
        )
    print(f"Wrote {rows} rows to {bench.out}")
    return EXIT_OK


def cmd_fit(args, config: AppConfig, settings: Settings) -> int:
    source = args.input or Path(config.bench.out)
    models = fit_from_samples(read_csv(source))
    out = args.out or "sla.json"
    save_models(models, out)
    for metric, model in models.items():
        logger.info(f"[SLA] {metric.value}: " + ", ".join(f"{k}={v:.6g}" for k, v in model.named().items()))
    print(f"Wrote coefficients to {out}")
    return EXIT_OK


def cmd_report(args, config: AppConfig, settings: Settings) -> int:
    source = args.input or Path("sla.json")
    models = load_models(source)
    n = max(args.clients) if args.clients else max(config.bench.clients)
    offers = sla_table(models, n, config.bench.proxies)
    print(render_text(offers), end="")
    if args.out:
        Path(args.out).write_text(render_csv(offers), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "up": cmd_up,
    "status": cmd_status,
    "down": cmd_down,
    "serve-node": cmd_serve_node,
    "serve-proxy": cmd_serve_proxy,
    "load": cmd_load,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    settings = Settings()
    logging.basicConfig(level=logging.DEBUG if args.verbose else settings.get_log_level(), format=LOG_FORMAT)

    try:
        config = load_config(args)
        return COMMANDS[args.command](args, config, settings)
    except ConfigError as e:
        logger.error(f"[CLI] Configuration error: {e}")
        for issue in e.issues:
            logger.error(f"[CLI]   {issue}")
        return EXIT_CONFIG
    except BenchCorrectnessError as e:
        logger.error(f"[CLI] Correctness failure: {e}")
        return EXIT_CORRECTNESS
    except FitError as e:
        logger.error(f"[CLI] Fit failed: {e}")
        return EXIT_ERROR
    except (SecNoSqlError, OSError, ValueError) as e:
        logger.error(f"[CLI] {e}")
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("[CLI] Interrupted")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

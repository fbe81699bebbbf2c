"""
Grid sweeps over (proxies, clients) and the bench CSV format.

Grid cells run one at a time. Each proxy count gets a fresh topology that is
loaded once; every (clients, repetition) cell then runs against it.
"""

import csv
import dataclasses
import logging
from collections import defaultdict
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core import AppConfig, DeploymentModel, MasterKey, MetricsSample, ModelKind
from .workload import load_phase, run_phase

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "model",
    "p",
    "n",
    "throughput_ops",
    "read_lat_us",
    "write_lat_us",
    "errors",
    "repetition",
    "read_p95_us",
    "read_p99_us",
    "write_p95_us",
    "write_p99_us",
]


def sweep(
    config: AppConfig,
    master: Optional[MasterKey],
    model: ModelKind,
    clients: Sequence[int],
    proxies: Sequence[int],
    repetitions: int,
    log: Optional[Callable[[str], None]] = None,
    on_sample: Optional[Callable[[MetricsSample], None]] = None,
) -> List[MetricsSample]:
    """
    Run every (p, n, repetition) cell for one deployment model.

    A multi-proxy model swept at p=1 runs as EncM1, the single-proxy
    deployment, so one grid covers the whole proxy axis. Each sample carries
    the model that actually ran.

    Args:
        config: Base configuration; its deployment supplies node count and replication.
        master: Master key, None only for NoEnc.
        model: Deployment model of the grid.
        clients: Client counts n.
        proxies: Proxy counts p, ignored for NoEnc.
        repetitions: Runs per (p, n) cell.
        log: Progress sink, defaults to the module logger.
        on_sample: Called with each sample as soon as it is measured.

    Returns:
        One sample per (p, n, repetition), in run order.
    """
    from ..services.topology import Topology

    log = log or (lambda msg: logger.info(f"[BENCH] {msg}"))
    proxy_counts = [0] if model is ModelKind.NO_ENC else list(proxies)
    samples: List[MetricsSample] = []

    for p in proxy_counts:
        cell_model = cell_kind(model, p)
        deployment = DeploymentModel.for_kind(cell_model, config.deployment.node_count, p)
        deployment.replication_factor = min(config.deployment.replication_factor, deployment.node_count)
        cell_config = dataclasses.replace(config, deployment=deployment)
        log(f"Starting {cell_model.value} with {deployment.node_count} nodes and {p} proxies")
        with Topology(cell_config, master) as topology:
            expected = load_phase(config.workload, topology, seed=config.bench.seed, log=log)
            for n in clients:
                for rep in range(repetitions):
                    sample = run_phase(
                        config.workload,
                        n,
                        topology,
                        expected,
                        seed=config.bench.seed + 7919 * rep + n,
                        repetition=rep,
                        log=log,
                    )
                    samples.append(sample)
                    if on_sample:
                        on_sample(sample)
    return samples


def cell_kind(model: ModelKind, proxies: int) -> ModelKind:
    """Model that runs a grid cell: one proxy is always EncM1."""
    if model in (ModelKind.ENC_M2, ModelKind.ENC_M3) and proxies == 1:
        return ModelKind.ENC_M1
    return model


def average_samples(samples: Iterable[MetricsSample]) -> List[MetricsSample]:
    """Mean of every metric per (model, p, n); repetition holds the number averaged."""
    groups: Dict[Tuple[ModelKind, int, int], List[MetricsSample]] = defaultdict(list)
    for sample in samples:
        groups[(sample.model, sample.proxies, sample.clients)].append(sample)
    averaged = []
    for (model, p, n), group in sorted(groups.items(), key=lambda item: (item[0][0].value, item[0][1], item[0][2])):
        def mean(attr: str) -> float:
            return float(np.mean([getattr(s, attr) for s in group]))
        averaged.append(MetricsSample(
            model=model,
            clients=n,
            proxies=p,
            throughput=mean("throughput"),
            read_latency_avg=mean("read_latency_avg"),
            write_latency_avg=mean("write_latency_avg"),
            error_count=sum(s.error_count for s in group),
            reads=sum(s.reads for s in group),
            writes=sum(s.writes for s in group),
            read_p95=mean("read_p95"),
            read_p99=mean("read_p99"),
            write_p95=mean("write_p95"),
            write_p99=mean("write_p99"),
            repetition=len(group),
        ))
    return averaged


def sample_to_row(sample: MetricsSample) -> Dict[str, str]:
    return {
        "model": sample.model.value,
        "p": str(sample.proxies),
        "n": str(sample.clients),
        "throughput_ops": f"{sample.throughput:.3f}",
        "read_lat_us": f"{sample.read_latency_avg:.3f}",
        "write_lat_us": f"{sample.write_latency_avg:.3f}",
        "errors": str(sample.error_count),
        "repetition": str(sample.repetition),
        "read_p95_us": f"{sample.read_p95:.3f}",
        "read_p99_us": f"{sample.read_p99:.3f}",
        "write_p95_us": f"{sample.write_p95:.3f}",
        "write_p99_us": f"{sample.write_p99:.3f}",
    }


def row_to_sample(row: Dict[str, str]) -> MetricsSample:
    def number(name: str) -> float:
        value = row.get(name)
        return float(value) if value not in (None, "") else 0.0

    return MetricsSample(
        model=ModelKind.parse(row["model"]),
        clients=int(row["n"]),
        proxies=int(row["p"]),
        throughput=float(row["throughput_ops"]),
        read_latency_avg=float(row["read_lat_us"]),
        write_latency_avg=float(row["write_lat_us"]),
        error_count=int(row.get("errors") or 0),
        repetition=int(row.get("repetition") or 0),
        read_p95=number("read_p95_us"),
        read_p99=number("read_p99_us"),
        write_p95=number("write_p95_us"),
        write_p99=number("write_p99_us"),
    )


def write_csv(samples: Iterable[MetricsSample], path: Union[str, Path]) -> int:
    """Write samples to `path`; returns the number of data rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for sample in samples:
            writer.writerow(sample_to_row(sample))
            count += 1
    return count


def read_csv(path: Union[str, Path]) -> List[MetricsSample]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = [c for c in CSV_COLUMNS[:8] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"Bench CSV is missing columns: {', '.join(missing)}")
        return [row_to_sample(row) for row in reader]

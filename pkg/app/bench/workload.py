"""
YCSB-style load and run phases.

Keys are "user0".."user{N-1}" in table `usertable` with fields field0..fieldK.
With several ledger-holding endpoints (proxies) the keyspace is split by
index modulo the endpoint count, and every key is only ever written and read
through the proxy that owns its partition.
"""

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Sequence

import numpy as np

from ..core import (
    BenchCorrectnessError,
    Distribution,
    ErrorCode,
    MetricsSample,
    ModelKind,
    QueryResult,
    WorkloadSpec,
    ZipfianState,
)
from ..proxy import Session
from .expected import ExpectedValues
from .zipfian import UniformGenerator, ZipfianGenerator

logger = logging.getLogger(__name__)

ALPHABET = np.frombuffer(
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_.:!#$%&()*+/<=>?@[]^{|}~",
    dtype=np.uint8,
)

LOADERS_PER_ENDPOINT = 4


class Endpoints(Protocol):
    """What the bench needs from a running topology."""
    model: ModelKind
    proxy_count: int

    @property
    def endpoint_count(self) -> int: ...

    @property
    def partitions(self) -> int: ...

    def open_session(self, target: int) -> Session: ...


def key_name(index: int) -> str:
    return f"user{index}"


def quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def random_values(rng: np.random.Generator, count: int, length: int) -> List[str]:
    """`count` random printable strings of `length` characters."""
    codes = ALPHABET[rng.integers(0, len(ALPHABET), size=(count, length))]
    return [row.tobytes().decode("ascii") for row in codes]


def insert_statement(spec: WorkloadSpec, key: str, values: Sequence[str]) -> str:
    columns = ", ".join([spec.key_column, *spec.field_names])
    literals = ", ".join(quote(v) for v in (key, *values))
    return f"INSERT INTO {spec.table} ({columns}) VALUES ({literals})"


def update_statement(spec: WorkloadSpec, key: str, field_name: str, value: str) -> str:
    return f"UPDATE {spec.table} SET {field_name} = {quote(value)} WHERE {spec.key_column} = {quote(key)}"


def read_statement(spec: WorkloadSpec, key: str) -> str:
    return f"SELECT * FROM {spec.table} WHERE {spec.key_column} = {quote(key)}"


def partition_keys(record_count: int, partitions: int, partition: int) -> int:
    """Number of key indices i < record_count with i % partitions == partition."""
    return max(0, (record_count - partition + partitions - 1) // partitions)


def _owner(index: int, endpoints: Endpoints) -> int:
    if endpoints.partitions > 1:
        return index % endpoints.partitions
    return index % endpoints.endpoint_count


# ========== load ==========

def load_phase(
    spec: WorkloadSpec,
    endpoints: Endpoints,
    seed: int = 42,
    log: Optional[Callable[[str], None]] = None,
) -> ExpectedValues:
    """
    Create the schema on every endpoint and insert record_count rows.

    Returns the expected-value table seeded with the loaded values.
    """
    log = log or (lambda msg: logger.info(f"[BENCH] {msg}"))
    schema = spec.schema()
    for target in range(endpoints.endpoint_count):
        session = endpoints.open_session(target)
        try:
            result = session.create_schema(schema)
        finally:
            session.close()
        if not result.ok:
            raise BenchCorrectnessError(f"Schema creation failed on endpoint {target}: {result.message}")

    rng = np.random.default_rng(seed)
    expected = ExpectedValues()
    fields = spec.field_names
    by_owner: List[List[int]] = [[] for _ in range(endpoints.endpoint_count)]
    for i in range(spec.record_count):
        by_owner[_owner(i, endpoints)].append(i)
    values = [random_values(rng, spec.field_count, spec.value_length) for _ in range(spec.record_count)]

    errors: List[str] = []

    def load_slice(target: int, indices: Sequence[int]) -> None:
        session = endpoints.open_session(target)
        try:
            for i in indices:
                key = key_name(i)
                result = session.query(insert_statement(spec, key, values[i]))
                if not result.ok:
                    errors.append(f"{key}: {result.error_code.name}")
                    return
                for name, value in zip(fields, values[i]):
                    expected.record((key, name), value)
        finally:
            session.close()

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, endpoints.endpoint_count * LOADERS_PER_ENDPOINT)) as pool:
        futures = [
            pool.submit(load_slice, target, indices[k::LOADERS_PER_ENDPOINT])
            for target, indices in enumerate(by_owner)
            for k in range(LOADERS_PER_ENDPOINT)
            if indices[k::LOADERS_PER_ENDPOINT]
        ]
        for future in futures:
            future.result()
    if errors:
        raise BenchCorrectnessError(f"Load failed for {len(errors)} slice(s), first: {errors[0]}")
    log(f"Loaded {spec.record_count} records in {time.perf_counter() - started:.2f}s")
    return expected


# ========== run ==========

class AtomicMetrics:
    """Thread-safe accumulator shared by all session drivers."""

    def __init__(self):
        self.lock = threading.Lock()
        self.read_latencies: List[float] = []
        self.write_latencies: List[float] = []
        self.errors = 0
        self.failure: Optional[str] = None

    def add(self, is_read: bool, latency_us: float) -> None:
        with self.lock:
            (self.read_latencies if is_read else self.write_latencies).append(latency_us)

    def error(self) -> None:
        with self.lock:
            self.errors += 1

    def fail(self, message: str) -> None:
        with self.lock:
            if self.failure is None:
                self.failure = message

    @property
    def completed(self) -> int:
        with self.lock:
            return len(self.read_latencies) + len(self.write_latencies)


@dataclass
class SessionPlan:
    """Pre-drawn operation sequence of one session."""
    target: int
    keys: List[int]
    reads: List[bool]
    fields: List[int]
    values: List[str] = field(default_factory=list)
    zipfian: Optional[ZipfianState] = None  # None for uniform key choice


def plan_sessions(spec: WorkloadSpec, clients: int, endpoints: Endpoints, seed: int) -> List[SessionPlan]:
    """Deterministic per-session operation sequences (keys and kinds) for a seed."""
    base, extra = divmod(spec.operation_count, clients)
    partitions = endpoints.partitions
    plans = []
    for s in range(clients):
        count = base + (1 if s < extra else 0)
        target = s % endpoints.endpoint_count
        partition = target if partitions > 1 else 0
        size = partition_keys(spec.record_count, partitions, partition)
        rng = np.random.default_rng([seed, s])
        if spec.distribution is Distribution.ZIPFIAN:
            chooser = ZipfianGenerator(size, seed=int(rng.integers(0, 2**63 - 1)))
            zipfian = chooser.state
            logger.debug(f"[BENCH] Session {s} draws {zipfian.item_count} keys with theta={zipfian.theta}")
        else:
            chooser = UniformGenerator(size, seed=int(rng.integers(0, 2**63 - 1)))
            zipfian = None
        ranks = chooser.next_batch(count)
        reads = rng.random(count) < spec.read_proportion
        fields = rng.integers(0, spec.field_count, size=count)
        write_count = int(count - reads.sum())
        plans.append(SessionPlan(
            target=target,
            keys=[int(r) * partitions + partition for r in ranks],
            reads=[bool(r) for r in reads],
            fields=[int(f) for f in fields],
            values=random_values(rng, write_count, spec.value_length),
            zipfian=zipfian,
        ))
    return plans


def _drive(
    spec: WorkloadSpec,
    plan: SessionPlan,
    endpoints: Endpoints,
    expected: ExpectedValues,
    metrics: AtomicMetrics,
    abort: threading.Event,
) -> None:
    session = endpoints.open_session(plan.target)
    field_names = spec.field_names
    writes = iter(plan.values)
    try:
        for index, is_read, field_index in zip(plan.keys, plan.reads, plan.fields):
            if abort.is_set():
                return
            key = key_name(index)
            if is_read:
                snapshots = {name: expected.begin_read((key, name)) for name in field_names}
                try:
                    t0 = time.perf_counter_ns()
                    result = session.query(read_statement(spec, key))
                    t1 = time.perf_counter_ns()
                    problem = _check_read(result, key, snapshots, expected)
                finally:
                    for name, snapshot in snapshots.items():
                        expected.end_read((key, name), snapshot)
                if problem:
                    metrics.fail(problem)
                    abort.set()
                    return
                if not result.ok:
                    metrics.error()
                    continue
            else:
                name = field_names[field_index]
                value = next(writes)
                token = expected.begin_write((key, name), value)
                t0 = time.perf_counter_ns()
                result = session.query(update_statement(spec, key, name, value))
                t1 = time.perf_counter_ns()
                if not result.ok:
                    metrics.error()
                    continue
                expected.end_write((key, name), token)
            metrics.add(is_read, (t1 - t0) / 1000.0)
    except Exception as e:
        metrics.fail(f"Session to endpoint {plan.target} crashed: {type(e).__name__}: {e}")
        abort.set()
    finally:
        session.close()


def _check_read(result: QueryResult, key: str, snapshots, expected: ExpectedValues) -> Optional[str]:
    if result.error_code is ErrorCode.INTEGRITY_FAILURE:
        return f"Integrity failure reading {key}"
    if result.error_code is ErrorCode.NOT_FOUND:
        return f"Loaded row {key} not found"
    if not result.ok:
        return None
    row = result.as_dict()
    for name, snapshot in snapshots.items():
        if not expected.check((key, name), snapshot, row.get(name)):
            return f"Unexpected value for {key}.{name}"
    return None


def run_phase(
    spec: WorkloadSpec,
    clients: int,
    endpoints: Endpoints,
    expected: ExpectedValues,
    seed: int = 42,
    repetition: int = 0,
    log: Optional[Callable[[str], None]] = None,
) -> MetricsSample:
    """
    Run operation_count operations from `clients` concurrent sessions.

    Args:
        spec: Workload mix, key distribution and counts.
        clients: Number of concurrent sessions n.
        endpoints: Running topology the sessions connect to.
        expected: Table filled by load_phase; every read is checked against it.
        seed: Seeds key choice and operation kinds.
        repetition: Recorded on the sample.
        log: Progress sink, defaults to the module logger.

    Returns:
        Throughput, latency averages and percentiles of the run.

    Raises:
        BenchCorrectnessError: A read failed integrity or returned a value
            no write could have produced.
    """
    if clients < 1:
        raise ValueError("At least one client session is required")
    log = log or (lambda msg: logger.info(f"[BENCH] {msg}"))
    plans = plan_sessions(spec, clients, endpoints, seed)
    metrics = AtomicMetrics()
    abort = threading.Event()

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=clients, thread_name_prefix="bench-session") as pool:
        futures = [pool.submit(_drive, spec, plan, endpoints, expected, metrics, abort) for plan in plans]
        for future in futures:
            future.result()
    wall = time.perf_counter() - started

    if metrics.failure is not None:
        raise BenchCorrectnessError(metrics.failure)

    reads = np.asarray(metrics.read_latencies, dtype=np.float64)
    writes = np.asarray(metrics.write_latencies, dtype=np.float64)
    completed = len(reads) + len(writes)
    sample = MetricsSample(
        model=endpoints.model,
        clients=clients,
        proxies=endpoints.proxy_count,
        throughput=completed / wall if wall > 0 else 0.0,
        read_latency_avg=_mean(reads),
        write_latency_avg=_mean(writes),
        error_count=metrics.errors,
        reads=len(reads),
        writes=len(writes),
        read_p95=_percentile(reads, 95),
        read_p99=_percentile(reads, 99),
        write_p95=_percentile(writes, 95),
        write_p99=_percentile(writes, 99),
        repetition=repetition,
    )
    log(
        f"{endpoints.model.value} p={endpoints.proxy_count} n={clients} rep={repetition}: "
        f"{sample.throughput:.1f} ops/sec, read {sample.read_latency_avg:.1f} us, "
        f"write {sample.write_latency_avg:.1f} us, errors {sample.error_count}"
    )
    return sample


def _mean(values: np.ndarray) -> float:
    return float(values.mean()) if values.size else 0.0


def _percentile(values: np.ndarray, q: float) -> float:
    return float(np.percentile(values, q)) if values.size else 0.0

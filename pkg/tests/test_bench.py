"""Key choosers, the expected-value table and the load/run phases."""

import math

import numpy as np
import pytest

from app.bench import (
    ExpectedValues,
    UniformGenerator,
    ZipfianGenerator,
    average_samples,
    cell_kind,
    load_phase,
    plan_sessions,
    run_phase,
    zeta,
    zipf_pmf,
)
from app.bench.workload import insert_statement, partition_keys, quote, read_statement, update_statement
from app.core import BenchCorrectnessError, Distribution, MetricsSample, ModelKind, SchemaDef, WorkloadSpec
from app.crypto import det_encrypt
from app.query import column_pseudonyms, table_pseudonym
from app.services import Topology

from conftest import small_config


def chi_square_p_value(statistic: float, dof: int) -> float:
    """Upper tail of the chi-square distribution, Wilson-Hilferty approximation."""
    z = ((statistic / dof) ** (1.0 / 3.0) - (1.0 - 2.0 / (9.0 * dof))) / math.sqrt(2.0 / (9.0 * dof))
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# ========== key choosers ==========

def test_zeta_and_pmf():
    assert zeta(1, 0.99) == pytest.approx(1.0)
    assert zeta(3, 0.5) == pytest.approx(1 + 2 ** -0.5 + 3 ** -0.5)
    pmf = zipf_pmf(1000)
    assert pmf.sum() == pytest.approx(1.0)
    assert np.all(np.diff(pmf) < 0)


@pytest.mark.parametrize("n", [100, 1000])
def test_zipfian_matches_distribution(n):
    draws = 1_000_000
    generator = ZipfianGenerator(n, seed=7)
    counts = np.bincount(generator.next_batch(draws), minlength=n)
    expected = zipf_pmf(n) * draws
    statistic = float(np.sum((counts - expected) ** 2 / expected))
    assert chi_square_p_value(statistic, n - 1) > 0.001
    assert counts.argmax() == 0


def test_most_popular_item_frequency():
    draws = 1_000_000
    counts = np.bincount(ZipfianGenerator(10, seed=13).next_batch(draws), minlength=10)
    direct = sum(1.0 / i ** 0.99 for i in range(1, 11))
    assert counts[0] / draws == pytest.approx(1.0 / direct, abs=0.01)


def test_frequencies_fall_with_rank():
    draws = 1_000_000
    counts = np.bincount(ZipfianGenerator(100, seed=17).next_batch(draws), minlength=100)
    # adjacent tail ranks differ by about 1%, inside sampling noise, so compare bands of ten
    bands = counts.reshape(10, 10).sum(axis=1)
    assert np.all(np.diff(bands) < 0)
    assert np.all(np.diff(counts[:10]) < 0)
    assert np.abs(counts / draws - zipf_pmf(100)).max() < 0.002


def test_chi_square_helper_rejects_wrong_distribution():
    n, draws = 100, 200_000
    counts = np.bincount(UniformGenerator(n, seed=7).next_batch(draws), minlength=n)
    expected = zipf_pmf(n) * draws
    statistic = float(np.sum((counts - expected) ** 2 / expected))
    assert chi_square_p_value(statistic, n - 1) < 1e-6


def test_generators_are_seeded_and_in_range():
    a, b = ZipfianGenerator(50, seed=3), ZipfianGenerator(50, seed=3)
    assert [a.next() for _ in range(100)] == [b.next() for _ in range(100)]
    assert all(0 <= x < 50 for x in ZipfianGenerator(50, seed=1).next_batch(10_000))
    assert all(0 <= x < 50 for x in UniformGenerator(50, seed=1).next_batch(10_000))
    assert ZipfianGenerator(1, seed=0).next() == 0
    state = a.state
    assert state.item_count == 50 and state.theta == 0.99 and state.zeta == pytest.approx(zeta(50, 0.99))


@pytest.mark.parametrize("items, theta", [(0, 0.99), (10, 0.0), (10, 1.0), (10, 1.5)])
def test_zipfian_rejects_bad_parameters(items, theta):
    with pytest.raises(ValueError):
        ZipfianGenerator(items, theta)


# ========== expected values ==========

def test_completed_write_dominates_older_value():
    table = ExpectedValues()
    table.record("c", "a")
    before = table.begin_read("c")
    token = table.begin_write("c", "b")
    during = table.begin_read("c")
    table.end_write("c", token)
    after = table.begin_read("c")

    assert table.acceptable("c", before) == {"a", "b"}
    assert table.acceptable("c", during) == {"a", "b"}
    assert table.acceptable("c", after) == {"b"}
    assert table.check("c", after, "b")
    assert not table.check("c", after, "a")
    assert not table.check("c", after, "zzz")


def test_overlapping_writes_both_stay_acceptable():
    table = ExpectedValues()
    table.record("c", "a")
    first = table.begin_write("c", "b")
    second = table.begin_write("c", "c")
    table.end_write("c", second)
    table.end_write("c", first)
    snapshot = table.begin_read("c")
    assert table.acceptable("c", snapshot) == {"b", "c"}


def test_log_is_compacted_once_no_snapshot_needs_old_values():
    table = ExpectedValues()
    for i in range(1000):
        table.record("c", f"v{i}")
    assert table.log_size("c") == 1

    snapshot = table.begin_read("c")
    for i in range(5):
        table.record("c", f"w{i}")
    # the open snapshot keeps its live value and everything written after it
    assert table.acceptable("c", snapshot) == {"v999", "w0", "w1", "w2", "w3", "w4"}
    assert table.log_size("c") == 6
    table.end_read("c", snapshot)
    assert table.log_size("c") == 1
    assert table.acceptable("c", table.begin_read("c")) == {"w4"}


def test_in_flight_writes_survive_compaction():
    table = ExpectedValues()
    table.record("c", "a")
    slow = table.begin_write("c", "slow")
    for i in range(50):
        table.record("c", f"x{i}")
    snapshot = table.begin_read("c")
    assert table.acceptable("c", snapshot) == {"slow", "x49"}
    table.end_read("c", snapshot)
    table.end_write("c", slow)
    assert table.log_size("c") == 2
    assert table.check("c", table.begin_read("c"), "slow")


def test_missing_value_only_for_unwritten_cell():
    table = ExpectedValues()
    assert table.check("new", table.begin_read("new"), None)
    table.record("old", "x")
    assert not table.check("old", table.begin_read("old"), None)
    assert len(table) == 2


# ========== statements and plans ==========

SPEC = WorkloadSpec(record_count=10, operation_count=40, field_count=2, value_length=4)


def test_statement_text():
    assert quote("it's") == "'it''s'"
    assert insert_statement(SPEC, "user1", ["a", "b"]) == (
        "INSERT INTO usertable (ycsb_key, field0, field1) VALUES ('user1', 'a', 'b')"
    )
    assert update_statement(SPEC, "user1", "field1", "v") == "UPDATE usertable SET field1 = 'v' WHERE ycsb_key = 'user1'"
    assert read_statement(SPEC, "user1") == "SELECT * FROM usertable WHERE ycsb_key = 'user1'"


@pytest.mark.parametrize("records, partitions, partition, size", [(10, 1, 0, 10), (10, 3, 0, 4), (10, 3, 2, 3), (2, 3, 2, 0)])
def test_partition_sizes(records, partitions, partition, size):
    assert partition_keys(records, partitions, partition) == size


class _Shape:
    model = ModelKind.ENC_M2
    proxy_count = 3
    endpoint_count = 3
    partitions = 3


def test_plans_are_deterministic_and_respect_partitions():
    plans = plan_sessions(SPEC, 5, _Shape(), seed=11)
    again = plan_sessions(SPEC, 5, _Shape(), seed=11)
    assert [p.keys for p in plans] == [p.keys for p in again]
    assert sum(len(p.keys) for p in plans) == SPEC.operation_count
    for index, plan in enumerate(plans):
        assert plan.target == index % 3
        assert all(k % 3 == plan.target and k < SPEC.record_count for k in plan.keys)
        assert len(plan.values) == plan.reads.count(False)
        assert plan.zipfian.item_count == partition_keys(SPEC.record_count, 3, plan.target)
        assert plan.zipfian.theta == 0.99


def test_uniform_plans():
    spec = WorkloadSpec(record_count=10, operation_count=20, distribution=Distribution.UNIFORM)
    plans = plan_sessions(spec, 2, _Shape(), seed=1)
    assert sum(len(p.keys) for p in plans) == 20
    assert all(p.zipfian is None for p in plans)


# ========== load and run ==========

@pytest.mark.parametrize(
    "kind, proxies",
    [(ModelKind.NO_ENC, None), (ModelKind.ENC_M1, None), (ModelKind.ENC_M2, 2), (ModelKind.ENC_M3, 3)],
)
def test_load_and_run_every_model(master, kind, proxies):
    config = small_config(kind, proxies)
    with Topology(config, master) as topology:
        expected = load_phase(config.workload, topology, seed=5)
        assert len(expected) == config.workload.record_count * config.workload.field_count
        sample = run_phase(config.workload, 4, topology, expected, seed=9)
    assert sample.model is kind
    assert sample.clients == 4
    assert sample.error_count == 0
    assert sample.reads + sample.writes == config.workload.operation_count
    assert sample.throughput > 0
    assert sample.read_latency_avg > 0 and sample.write_latency_avg > 0
    assert sample.read_p99 >= sample.read_p95 > 0


def test_tampered_store_fails_the_run(master, suite):
    config = small_config(ModelKind.ENC_M1, records=20, ops=60)
    config.workload.read_proportion = 1.0
    with Topology(config, master) as topology:
        expected = load_phase(config.workload, topology, seed=5)
        cluster = topology.cluster
        table = table_pseudonym(config.workload.table, suite.keys)
        column = column_pseudonyms(config.workload.schema(), suite.keys)["field0"]
        for i in range(config.workload.record_count):
            key = det_encrypt(suite.keys, f"user{i}".encode()).data
            for node in cluster.replicas_of(key):
                cluster.node(node).tamper(table, key, column, 0)
        with pytest.raises(BenchCorrectnessError):
            run_phase(config.workload, 2, topology, expected, seed=9)


def test_wrong_value_fails_the_run(master):
    config = small_config(ModelKind.NO_ENC, records=10, ops=40)
    config.workload.read_proportion = 1.0
    with Topology(config, master) as topology:
        expected = load_phase(config.workload, topology, seed=5)
        # a write the bench does not know about
        with topology.open_session(0) as session:
            assert session.query("UPDATE usertable SET field0 = 'rogue' WHERE ycsb_key = 'user0'").ok
            assert session.query("UPDATE usertable SET field0 = 'rogue' WHERE ycsb_key = 'user1'").ok
        with pytest.raises(BenchCorrectnessError):
            run_phase(config.workload, 1, topology, expected, seed=9)


def test_run_needs_a_client(master):
    config = small_config(ModelKind.NO_ENC, records=5, ops=5)
    with Topology(config, master) as topology:
        expected = load_phase(config.workload, topology)
        with pytest.raises(ValueError):
            run_phase(config.workload, 0, topology, expected)


def test_schema_used_by_bench():
    assert SPEC.schema() == SchemaDef("usertable", "ycsb_key", ("field0", "field1"))


def test_average_samples_groups_repetitions():
    def sample(p, n, t, rep, errors=0):
        return MetricsSample(ModelKind.ENC_M2, n, p, t, 2 * t, 3 * t, error_count=errors, reads=5, writes=5, repetition=rep)

    averaged = average_samples([sample(2, 4, 10.0, 0), sample(2, 4, 30.0, 1, errors=1), sample(2, 1, 7.0, 0)])
    assert [(s.proxies, s.clients) for s in averaged] == [(2, 1), (2, 4)]
    grouped = averaged[1]
    assert (grouped.throughput, grouped.read_latency_avg, grouped.write_latency_avg) == (20.0, 40.0, 60.0)
    assert (grouped.error_count, grouped.reads, grouped.repetition) == (1, 10, 2)


@pytest.mark.parametrize(
    "model, p, ran",
    [
        (ModelKind.ENC_M2, 1, ModelKind.ENC_M1),
        (ModelKind.ENC_M3, 1, ModelKind.ENC_M1),
        (ModelKind.ENC_M2, 2, ModelKind.ENC_M2),
        (ModelKind.ENC_M3, 4, ModelKind.ENC_M3),
        (ModelKind.ENC_M1, 1, ModelKind.ENC_M1),
        (ModelKind.NO_ENC, 0, ModelKind.NO_ENC),
    ],
)
def test_single_proxy_cell_runs_as_encm1(model, p, ran):
    assert cell_kind(model, p) is ran

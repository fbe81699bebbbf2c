"""Secure proxy: CRUD semantics, integrity verification, confidentiality and coordinator choice."""

import logging
import threading

import numpy as np
import pytest

from app.core import CoordinatorPolicy, ErrorCode, ModelKind, NodeId, ProxyConfig, RunMode, SchemaDef
from app.bench.workload import quote
from app.crypto import CipherSuite, det_encrypt
from app.net import Opcode, decode_rows, encode_query
from app.proxy import IntegrityLedger, LocalSession, SecureProxy
from app.query import column_pseudonyms, table_pseudonym
from app.services import Topology
from app.store import Cluster, RemoteCoordinator

from conftest import small_config

USERS = SchemaDef("users", "user_id", ("name", "email"))
INSERT_U1 = "INSERT INTO users (user_id, name, email) VALUES ('u1', 'Ann', 'ann@example.org')"
SELECT_U1 = "SELECT * FROM users WHERE user_id = 'u1'"


def _stored(proxy, keys, key="u1"):
    """(table pseudonym, key ciphertext, serving replica) of a stored row."""
    table = table_pseudonym("users", keys)
    key_ct = det_encrypt(keys, key.encode()).data
    return table, key_ct, proxy.backend.serving_replica(key_ct)


# ========== CRUD ==========

def test_insert_then_select(session):
    assert session.query(INSERT_U1).ok
    result = session.query(SELECT_U1)
    assert result.cells == (("user_id", "u1"), ("name", "Ann"), ("email", "ann@example.org"))


def test_select_projection_order(session):
    session.query(INSERT_U1)
    result = session.query("SELECT email, user_id FROM users WHERE user_id = 'u1'")
    assert result.cells == (("email", "ann@example.org"), ("user_id", "u1"))


def test_update_merges_and_upserts(session):
    session.query(INSERT_U1)
    assert session.query("UPDATE users SET name = 'Bea' WHERE user_id = 'u1'").ok
    assert session.query(SELECT_U1).as_dict() == {"user_id": "u1", "name": "Bea", "email": "ann@example.org"}
    assert session.query("UPDATE users SET email = 'c@x' WHERE user_id = 'u9'").ok
    assert session.query("SELECT * FROM users WHERE user_id = 'u9'").cells == (("user_id", "u9"), ("email", "c@x"))


def test_insert_replaces_whole_row(session):
    session.query(INSERT_U1)
    session.query("INSERT INTO users (user_id, name) VALUES ('u1', 'Cy')")
    assert session.query(SELECT_U1).as_dict() == {"user_id": "u1", "name": "Cy"}


def test_delete_and_not_found(session, proxy, keys):
    session.query(INSERT_U1)
    table, key_ct, _ = _stored(proxy, keys)
    assert (table, key_ct) in proxy.ledger
    assert session.query("DELETE FROM users WHERE user_id = 'u1'").ok
    assert (table, key_ct) not in proxy.ledger
    assert session.query(SELECT_U1).error_code is ErrorCode.NOT_FOUND
    assert session.query("DELETE FROM users WHERE user_id = 'u1'").error_code is ErrorCode.NOT_FOUND


@pytest.mark.parametrize(
    "text, code",
    [
        ("SELECT * FROM users WHERE", ErrorCode.PARSE),
        ("SELECT * FROM users WHERE name = 'Ann'", ErrorCode.PARSE),
        ("SELECT * FROM ghosts WHERE id = 'x'", ErrorCode.SCHEMA),
        ("INSERT INTO users (user_id, phone) VALUES ('u1', 'x')", ErrorCode.SCHEMA),
        ("CREATE TABLE users (user_id, other)", ErrorCode.SCHEMA),
    ],
)
def test_errors_map_to_wire_codes(session, text, code):
    assert session.query(text).error_code is code


def test_projection_of_unset_columns_returns_empty_rows(session, proxy):
    session.query("INSERT INTO users (user_id, email) VALUES ('u9', 'e@x')")
    payload = proxy.handle_payload(encode_query("SELECT name FROM users WHERE user_id = 'u9'"))
    assert payload[0] == Opcode.ROWS
    assert decode_rows(payload[1:]) == []
    result = session.query("SELECT name FROM users WHERE user_id = 'u9'")
    assert result.ok and result.rows and result.cells == ()
    assert session.query("SELECT name FROM users WHERE user_id = 'u8'").error_code is ErrorCode.NOT_FOUND


def test_create_table_through_query_is_idempotent(proxy):
    session = LocalSession(proxy.handle_payload)
    assert session.query("CREATE TABLE items (item_id, price)").ok
    assert session.query("CREATE TABLE items (item_id, price)").ok
    assert session.create_schema(SchemaDef("items", "item_id", ("price",))).ok
    assert session.query("INSERT INTO items (item_id, price) VALUES ('i1', '3')").ok


def test_typed_entry_points_restrict_statement_kind(session, proxy):
    assert proxy.handle_write(INSERT_U1).ok
    assert proxy.handle_read(SELECT_U1).ok
    assert proxy.handle_read(INSERT_U1).error_code is ErrorCode.PARSE
    assert proxy.handle_write(SELECT_U1).error_code is ErrorCode.PARSE
    assert proxy.handle_delete("DELETE FROM users WHERE user_id = 'u1'").ok


def test_closed_proxy_reports_backend_error(suite):
    proxy = SecureProxy(ProxyConfig(), suite, Cluster.local(1, 1))
    proxy.close()
    assert LocalSession(proxy.handle_payload).query(SELECT_U1).error_code is ErrorCode.BACKEND


# ========== integrity ==========

def test_any_single_bit_flip_is_detected(session, proxy, keys, cluster):
    session.query(INSERT_U1)
    table, key_ct, serving = _stored(proxy, keys)
    column = column_pseudonyms(USERS, keys)["email"]
    node = cluster.node(serving)
    length = len(node.get(table, key_ct).cells[column])
    for byte_index in range(length):
        for bit in range(8):
            node.tamper(table, key_ct, column, byte_index, mask=1 << bit)
            assert session.query(SELECT_U1).error_code is ErrorCode.INTEGRITY_FAILURE
            node.tamper(table, key_ct, column, byte_index, mask=1 << bit)
    assert session.query(SELECT_U1).ok


ORDERS = SchemaDef("orders", "order_id", ("item", "quantity", "address"))


def test_bit_flips_in_every_value_column_are_detected(proxy, keys, cluster):
    session = LocalSession(proxy.handle_payload)
    session.create_schema(ORDERS)
    select = "SELECT * FROM orders WHERE order_id = 'o1'"
    assert session.query("INSERT INTO orders (order_id, item, quantity, address) VALUES ('o1', 'lamp', '2', '1 Elm St')").ok
    table = table_pseudonym("orders", keys)
    key_ct = det_encrypt(keys, b"o1").data
    node = cluster.node(cluster.serving_replica(key_ct))
    columns = column_pseudonyms(ORDERS, keys)
    flips = 0
    for name in ORDERS.value_columns:
        column = columns[name]
        for byte_index in range(len(node.get(table, key_ct).cells[column])):
            for bit in range(8):
                node.tamper(table, key_ct, column, byte_index, mask=1 << bit)
                assert session.query(select).error_code is ErrorCode.INTEGRITY_FAILURE
                node.tamper(table, key_ct, column, byte_index, mask=1 << bit)
                flips += 1
    assert flips >= 3 * 32 * 8
    assert session.query(select).as_dict()["address"] == "1 Elm St"


def test_cluster_tamper_helper(session, proxy, keys, cluster):
    session.query(INSERT_U1)
    table, key_ct, serving = _stored(proxy, keys)
    cluster.tamper(serving, table, key_ct, column_pseudonyms(USERS, keys)["name"], 20)
    assert session.query(SELECT_U1).error_code is ErrorCode.INTEGRITY_FAILURE


def test_replayed_old_row_is_detected(session, proxy, keys, cluster):
    session.query(INSERT_U1)
    table, key_ct, serving = _stored(proxy, keys)
    old = dict(cluster.node(serving).get(table, key_ct).cells)
    session.query("UPDATE users SET name = 'Eve' WHERE user_id = 'u1'")
    cluster.node(serving).replace_row(table, key_ct, old)
    assert session.query(SELECT_U1).error_code is ErrorCode.INTEGRITY_FAILURE


def test_spliced_cell_from_other_row_is_detected(session, proxy, keys, cluster):
    session.query(INSERT_U1)
    session.query("INSERT INTO users (user_id, name, email) VALUES ('u2', 'Bob', 'bob@example.org')")
    table, key1, serving = _stored(proxy, keys, "u1")
    _, key2, _ = _stored(proxy, keys, "u2")
    column = column_pseudonyms(USERS, keys)["email"]
    cells = dict(cluster.node(serving).get(table, key1).cells)
    cells[column] = cluster.node(cluster.serving_replica(key2)).get(table, key2).cells[column]
    cluster.node(serving).replace_row(table, key1, cells)
    assert session.query(SELECT_U1).error_code is ErrorCode.INTEGRITY_FAILURE


def test_dropped_cell_is_detected(session, proxy, keys, cluster):
    session.query(INSERT_U1)
    table, key_ct, serving = _stored(proxy, keys)
    cells = dict(cluster.node(serving).get(table, key_ct).cells)
    cells.pop(column_pseudonyms(USERS, keys)["email"])
    cluster.node(serving).replace_row(table, key_ct, cells)
    assert session.query(SELECT_U1).error_code is ErrorCode.INTEGRITY_FAILURE


def test_row_without_ledger_entry_is_rejected(session, proxy, keys, cluster):
    session.query(INSERT_U1)
    table, key_ct, serving = _stored(proxy, keys)
    forged = det_encrypt(keys, b"u7").data
    cells = dict(cluster.node(serving).get(table, key_ct).cells)
    for node_id in cluster.replicas_of(forged):
        cluster.node(node_id).replace_row(table, forged, cells)
    assert session.query("SELECT * FROM users WHERE user_id = 'u7'").error_code is ErrorCode.INTEGRITY_FAILURE


def test_update_refuses_to_launder_tampered_row(session, proxy, keys, cluster):
    session.query(INSERT_U1)
    table, key_ct, serving = _stored(proxy, keys)
    cluster.tamper(serving, table, key_ct, column_pseudonyms(USERS, keys)["email"], 3)
    result = session.query("UPDATE users SET name = 'Zed' WHERE user_id = 'u1'")
    assert result.error_code is ErrorCode.INTEGRITY_FAILURE
    assert session.query(SELECT_U1).error_code is ErrorCode.INTEGRITY_FAILURE


def test_concurrent_writes_and_reads_never_fail_integrity(session, proxy):
    session.query(INSERT_U1)
    failures = []

    def worker(index):
        s = LocalSession(proxy.handle_payload)
        for i in range(40):
            if i % 2:
                r = s.query(f"UPDATE users SET name = 'w{index}-{i}' WHERE user_id = 'u1'")
            else:
                r = s.query(SELECT_U1)
            if not r.ok:
                failures.append(r.error_code)

    threads = [threading.Thread(target=worker, args=(n,)) for n in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert failures == []
    assert session.query(SELECT_U1).as_dict()["email"] == "ann@example.org"


# ========== confidentiality ==========

# long enough that random ciphertext bytes never match by chance
PATIENTS = SchemaDef("patients", "patient_id", ("diagnosis", "physician"))
PATIENT_INSERT = (
    "INSERT INTO patients (patient_id, diagnosis, physician) "
    "VALUES ('patient-0042', 'hypertension', 'Dr. Watson')"
)
PATIENT_SELECT = "SELECT * FROM patients WHERE patient_id = 'patient-0042'"
PLAINTEXTS = [b"patients", b"patient_id", b"diagnosis", b"physician", b"patient-0042", b"hypertension", b"Dr. Watson"]


def test_store_holds_no_plaintext(proxy, cluster):
    session = LocalSession(proxy.handle_payload)
    session.create_schema(PATIENTS)
    session.query(PATIENT_INSERT)
    session.query("UPDATE patients SET physician = 'Dr. Watson' WHERE patient_id = 'patient-0042'")
    dumped = list(cluster.dump())
    assert dumped
    for blob in dumped:
        for secret in PLAINTEXTS:
            assert secret not in blob


def test_logs_hold_no_plaintext(proxy, caplog):
    caplog.set_level(logging.DEBUG)
    session = LocalSession(proxy.handle_payload)
    session.create_schema(USERS)
    session.query(INSERT_U1)
    session.query(SELECT_U1)
    session.query("SELECT * FROM users WHERE user_id = 'missing'")
    session.query("SELECT * FROM users WHERE name = 'Ann'")
    text = caplog.text
    for secret in ["users", "user_id", "ann@example.org", "Ann", "missing"]:
        assert secret not in text


def test_proxy_to_node_traffic_is_encrypted(master):
    sent = []
    config = small_config(ModelKind.ENC_M1, mode=RunMode.TCP)
    with Topology(config, master) as topology:
        nodes = {NodeId(i): ep for i, ep in enumerate(topology.node_endpoints)}
        backend = RemoteCoordinator(nodes, tap=lambda direction, payload: sent.append(payload))
        proxy = SecureProxy(ProxyConfig(node_count=4), CipherSuite.from_master(master), backend)
        try:
            session = LocalSession(proxy.handle_payload)
            assert session.create_schema(PATIENTS).ok
            assert session.query(PATIENT_INSERT).ok
            assert session.query("UPDATE patients SET diagnosis = 'hypertension' WHERE patient_id = 'patient-0042'").ok
            assert session.query(PATIENT_SELECT).as_dict()["diagnosis"] == "hypertension"
            assert session.query("DELETE FROM patients WHERE patient_id = 'patient-0042'").ok
        finally:
            proxy.close()
    assert sent
    for payload in sent:
        for secret in PLAINTEXTS:
            assert secret not in payload


# ========== coordinator choice ==========

def test_rotating_proxy_uses_every_coordinator(suite, caplog):
    caplog.set_level(logging.INFO)
    cluster = Cluster.local(4, 4)
    proxy = SecureProxy(ProxyConfig(coordinator_policy=CoordinatorPolicy.ROTATE), suite, cluster)
    try:
        session = LocalSession(proxy.handle_payload)
        session.create_schema(USERS)
        for i in range(7):
            session.query(f"INSERT INTO users (user_id, name) VALUES ('u{i}', 'n')")
        assert set(proxy.coordinator_usage) == set(cluster.nodes)
        assert sum(proxy.coordinator_usage.values()) == 8
        for i in range(4):
            assert f"Using coordinator node-{i}" in caplog.text
    finally:
        proxy.close()


def test_pinned_proxy_uses_one_coordinator(suite):
    cluster = Cluster.local(4, 4)
    proxy = SecureProxy(ProxyConfig(pinned_node=6), suite, cluster)
    try:
        session = LocalSession(proxy.handle_payload)
        session.create_schema(USERS)
        for i in range(5):
            session.query(f"INSERT INTO users (user_id, name) VALUES ('u{i}', 'n')")
        assert set(proxy.coordinator_usage) == {NodeId(2)}
        assert cluster.coordinator_hits == {NodeId(2): 6}
    finally:
        proxy.close()


def test_persistent_ledger_survives_restart(suite, tmp_path):
    cluster = Cluster.local(2, 2)
    path = tmp_path / "proxy-0.ledger"
    first = SecureProxy(ProxyConfig(ledger_path=str(path)), suite, cluster)
    session = LocalSession(first.handle_payload)
    session.create_schema(USERS)
    session.query(INSERT_U1)
    first.close()

    second = SecureProxy(ProxyConfig(ledger_path=str(path)), suite, cluster, IntegrityLedger(path))
    try:
        session = LocalSession(second.handle_payload)
        session.create_schema(USERS)
        assert session.query(SELECT_U1).as_dict()["name"] == "Ann"
    finally:
        second.close()


# ========== model check ==========

TABLES = [
    SchemaDef("accounts", "account_id", ("owner", "balance")),
    SchemaDef("events", "event_id", ("kind",)),
    SchemaDef("devices", "device_id", ("model", "owner", "firmware")),
]


def _random_text(rng):
    alphabet = "abcxyz019 '-é"
    return "".join(alphabet[i] for i in rng.integers(len(alphabet), size=int(rng.integers(0, 12))))


def _expected_cells(schema, key, row, columns):
    out = []
    for column in columns:
        if column == schema.key_column:
            out.append((column, key))
        elif column in row:
            out.append((column, row[column]))
    return tuple(out)


def test_random_operations_match_an_in_memory_model(proxy):
    rng = np.random.default_rng(99)
    session = LocalSession(proxy.handle_payload)
    model = {}
    for schema in TABLES:
        assert session.create_schema(schema).ok
        model[schema.table] = {}

    for _ in range(10_000):
        schema = TABLES[rng.integers(len(TABLES))]
        rows = model[schema.table]
        key = f"k{rng.integers(40)}"
        where = f"WHERE {schema.key_column} = {quote(key)}"
        action = rng.integers(4)
        if action in (0, 1):
            count = int(rng.integers(1, len(schema.value_columns) + 1))
            columns = [schema.value_columns[i] for i in rng.permutation(len(schema.value_columns))[:count]]
            values = {column: _random_text(rng) for column in columns}
            if action == 0:
                names = ", ".join([schema.key_column] + columns)
                literals = ", ".join([quote(key)] + [quote(values[c]) for c in columns])
                assert session.query(f"INSERT INTO {schema.table} ({names}) VALUES ({literals})").ok
                rows[key] = values
            else:
                sets = ", ".join(f"{c} = {quote(values[c])}" for c in columns)
                assert session.query(f"UPDATE {schema.table} SET {sets} {where}").ok
                rows.setdefault(key, {}).update(values)
        elif action == 2:
            result = session.query(f"DELETE FROM {schema.table} {where}")
            if key in rows:
                assert result.ok
                del rows[key]
            else:
                assert result.error_code is ErrorCode.NOT_FOUND
        else:
            if rng.integers(2):
                projection = list(schema.columns)
                text = f"SELECT * FROM {schema.table} {where}"
            else:
                projection = [schema.columns[i] for i in rng.permutation(len(schema.columns))[:2]]
                text = f"SELECT {', '.join(projection)} FROM {schema.table} {where}"
            result = session.query(text)
            if key in rows:
                assert result.cells == _expected_cells(schema, key, rows[key], projection)
            else:
                assert result.error_code is ErrorCode.NOT_FOUND


@pytest.mark.slow
def test_hundred_thousand_clean_reads_raise_no_integrity_alarm(session, proxy):
    for i in range(100):
        assert session.query(f"INSERT INTO users (user_id, name, email) VALUES ('u{i}', 'n{i}', 'e{i}')").ok
    stop = threading.Event()

    def writer():
        s = LocalSession(proxy.handle_payload)
        i = 0
        while not stop.is_set():
            s.query(f"UPDATE users SET name = 'w{i}' WHERE user_id = 'u{i % 100}'")
            i += 1

    thread = threading.Thread(target=writer)
    thread.start()
    try:
        rng = np.random.default_rng(12)
        for key in rng.integers(100, size=100_000):
            result = session.query(f"SELECT * FROM users WHERE user_id = 'u{key}'")
            assert result.error_code is None, result.error_code
    finally:
        stop.set()
        thread.join()


# ========== confidentiality at scale ==========

def test_thousand_rows_over_tcp_leak_no_plaintext(master):
    rng = np.random.default_rng(5)
    sent = []
    secrets = []
    config = small_config(ModelKind.ENC_M1, mode=RunMode.TCP)
    with Topology(config, master) as topology:
        nodes = {NodeId(i): ep for i, ep in enumerate(topology.node_endpoints)}
        backend = RemoteCoordinator(nodes, tap=lambda direction, payload: sent.append(payload))
        proxy = SecureProxy(ProxyConfig(node_count=4), CipherSuite.from_master(master), backend)
        try:
            session = LocalSession(proxy.handle_payload)
            assert session.create_schema(PATIENTS).ok
            for i in range(1000):
                patient = f"patient-{i:06d}"
                diagnosis = f"diagnosis-{rng.integers(10**9):09d}"
                physician = f"Dr. Number {i:06d}"
                secrets.extend(s.encode() for s in (patient, diagnosis, physician))
                assert session.query(
                    f"INSERT INTO patients (patient_id, diagnosis, physician) "
                    f"VALUES ({quote(patient)}, {quote(diagnosis)}, {quote(physician)})"
                ).ok
            for i in range(0, 1000, 7):
                assert session.query(f"SELECT * FROM patients WHERE patient_id = 'patient-{i:06d}'").ok
            for i in range(0, 1000, 13):
                assert session.query(
                    f"UPDATE patients SET physician = 'Dr. Number {i:06d}' WHERE patient_id = 'patient-{i:06d}'"
                ).ok
            dumped = [blob for service in topology.node_services.values() for blob in service.node.dump()]
        finally:
            proxy.close()

    assert len(sent) > 2000
    wire = b"\x00".join(sent)
    stored = b"\x00".join(dumped)
    for secret in PLAINTEXTS[:3] + secrets:
        assert secret not in wire
        assert secret not in stored

"""Shared fixtures for the SEC-NoSQL test suite."""

import sys
from pathlib import Path

import pytest

# Add project root to sys.path so app module is importable
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.core import AppConfig, DeploymentModel, MasterKey, ModelKind, ProxyConfig, RunMode, SchemaDef, WorkloadSpec
from app.crypto import CipherSuite, derive_keys
from app.proxy import LocalSession, SecureProxy
from app.query import SchemaCatalog
from app.store import Cluster

MASTER_HEX = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running benchmark checks")


@pytest.fixture
def master():
    return MasterKey.from_hex(MASTER_HEX)


@pytest.fixture
def keys(master):
    return derive_keys(master)


@pytest.fixture
def suite(master):
    return CipherSuite.from_master(master)


@pytest.fixture
def catalog():
    catalog = SchemaCatalog()
    catalog.register(SchemaDef("users", "user_id", ("name", "email")))
    return catalog


@pytest.fixture
def cluster():
    return Cluster.local(node_count=4, replication_factor=4)


@pytest.fixture
def proxy(suite, cluster):
    proxy = SecureProxy(ProxyConfig(proxy_id=0, node_count=4), suite, cluster)
    yield proxy
    proxy.close()


@pytest.fixture
def session(proxy):
    """Client session on the proxy fixture with the `users` table created."""
    s = LocalSession(proxy.handle_payload)
    assert s.create_schema(SchemaDef("users", "user_id", ("name", "email"))).ok
    return s


def small_config(kind: ModelKind, proxies=None, mode: RunMode = RunMode.LOCAL, records: int = 60, ops: int = 120) -> AppConfig:
    """A topology config small enough for unit tests."""
    return AppConfig(
        deployment=DeploymentModel.for_kind(kind, 4, proxies),
        workload=WorkloadSpec(record_count=records, operation_count=ops, value_length=16, field_count=3),
        mode=mode,
        base_port=0,
    )

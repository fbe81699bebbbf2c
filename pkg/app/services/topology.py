"""
Topology supervisor: brings a deployment model up, hands out client
sessions and tears everything down again.

Modes:
  - local:        one in-process cluster, proxies called directly through the wire codec
  - tcp:          node and proxy servers on background threads, real sockets
  - multiprocess: one child process per node and per proxy
"""

import json
import logging
import multiprocessing
import os
import socket
import time
from contextlib import closing
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..core import (
    AppConfig,
    ConfigError,
    MasterKey,
    ModelKind,
    NodeId,
    ProxyConfig,
    RunMode,
    ValidationEngine,
    errors_only,
)
from ..crypto import CipherSuite
from ..proxy import LocalSession, ProxyServer, SecureProxy, Session, TcpSession, remote_proxy, serve_proxy
from ..store import Cluster, NodeServer, NodeService, RemoteNode, connect_node, local_services, serve_node

logger = logging.getLogger(__name__)

Endpoint = Tuple[str, int]

PROXY_PORT_OFFSET = 100
STARTUP_TIMEOUT_S = 20.0


class Topology:
    """A running (or runnable) deployment of nodes and proxies."""

    def __init__(self, config: AppConfig, master: Optional[MasterKey] = None):
        self.config = config
        self.deployment = config.deployment
        self.model: ModelKind = config.deployment.kind
        self.proxy_count = config.deployment.proxy_count
        self.master = master
        self.running = False

        self.cluster: Optional[Cluster] = None
        self.node_services: Dict[NodeId, NodeService] = {}
        self.proxies: List[SecureProxy] = []
        self.node_servers: List[NodeServer] = []
        self.proxy_servers: List[ProxyServer] = []
        self.processes: List[multiprocessing.Process] = []
        self.node_endpoints: List[Endpoint] = []
        self.proxy_endpoints: List[Endpoint] = []

    # ----- Endpoints protocol -----

    @property
    def endpoint_count(self) -> int:
        return self.proxy_count if self.model.encrypted else self.deployment.node_count

    @property
    def partitions(self) -> int:
        """Ledger partitions: every proxy owns the keys it wrote."""
        return self.proxy_count if self.model.encrypted else 1

    def open_session(self, target: int) -> Session:
        if not self.running:
            raise RuntimeError("Topology is not running")
        target %= self.endpoint_count
        if self.config.mode is RunMode.LOCAL:
            if self.model.encrypted:
                return LocalSession(self.proxies[target].handle_payload)
            return LocalSession(self.node_services[NodeId(target)].handle_payload, plain=True)
        endpoints = self.proxy_endpoints if self.model.encrypted else self.node_endpoints
        host, port = endpoints[target]
        return TcpSession(host, port, plain=not self.model.encrypted)

    # ----- lifecycle -----

    def validate(self) -> None:
        issues = ValidationEngine.validate_config(self.config)
        errors = errors_only(issues)
        for issue in issues:
            if issue not in errors:
                logger.warning(f"[CLI] {issue}")
        if errors:
            raise ConfigError("; ".join(str(e) for e in errors), errors)
        if self.model.encrypted and self.master is None:
            raise ConfigError(f"{self.model.value} needs a master key")

    def up(self) -> "Topology":
        """Validate, then start every component. Nothing starts on a config error."""
        if self.running:
            return self
        self.validate()
        mode = self.config.mode
        try:
            if mode is RunMode.LOCAL:
                self._up_local()
            elif mode is RunMode.TCP:
                self._up_tcp()
            else:
                self._up_multiprocess()
        except Exception:
            self.down()
            raise
        self.running = True
        logger.info(
            f"[CLI] {self.model.value} up ({mode.value}): {self.deployment.node_count} nodes, "
            f"{self.proxy_count} proxies, rf={self.deployment.replication_factor}"
        )
        return self

    def down(self) -> None:
        for server in self.proxy_servers + self.node_servers:
            server.stop()
        for proxy in self.proxies:
            proxy.close()
        for service in self.node_services.values():
            for handle in getattr(service.cluster, "handles", {}).values():
                if isinstance(handle, RemoteNode):
                    handle.close()
        for process in self.processes:
            if process.is_alive():
                process.terminate()
            process.join(timeout=5)
        for host, port in self.node_endpoints + self.proxy_endpoints:
            wait_until_closed(host, port)
        if self.running:
            logger.info(f"[CLI] {self.model.value} down")
        self.proxy_servers, self.node_servers, self.proxies, self.processes = [], [], [], []
        self.node_services = {}
        self.node_endpoints, self.proxy_endpoints = [], []
        self.running = False

    def __enter__(self) -> "Topology":
        return self.up()

    def __exit__(self, exc_type, exc, tb):
        self.down()

    # ----- builders -----

    def proxy_config(self, proxy_id: int, port: int = 0) -> ProxyConfig:
        ledger_path = None
        if self.config.ledger_dir:
            ledger_path = str(Path(self.config.ledger_dir) / f"proxy-{proxy_id}.ledger")
        return ProxyConfig(
            proxy_id=proxy_id,
            host=self.config.host,
            port=port,
            coordinator_policy=self.deployment.coordinator_policy,
            pinned_node=proxy_id % self.deployment.node_count,
            node_count=self.deployment.node_count,
            service_delay_us=self.config.service_delay_us,
            workers=self.config.proxy_workers,
            ledger_path=ledger_path,
        )

    def _up_local(self) -> None:
        self.cluster = Cluster.local(
            self.deployment.node_count, self.deployment.replication_factor, self.config.service_delay_us
        )
        self.node_services = local_services(self.cluster)
        if self.model.encrypted:
            suite = CipherSuite.from_master(self.master)
            self.proxies = [SecureProxy(self.proxy_config(j), suite, self.cluster) for j in range(self.proxy_count)]

    def _ports(self) -> Tuple[List[int], List[int]]:
        base = self.config.base_port
        nodes = self.deployment.node_count
        if base == 0:
            return [0] * nodes, [0] * self.proxy_count
        return [base + i for i in range(nodes)], [base + PROXY_PORT_OFFSET + j for j in range(self.proxy_count)]

    def _up_tcp(self) -> None:
        host = self.config.host
        node_ports, proxy_ports = self._ports()
        # bind first so ephemeral ports are known before peers are wired
        self.node_servers = [NodeServer(host, port) for port in node_ports]
        self.node_endpoints = [server.endpoint for server in self.node_servers]
        for index, server in enumerate(self.node_servers):
            service = connect_node(
                index, self.node_endpoints, self.deployment.replication_factor, self.config.service_delay_us
            )
            self.node_services[service.node_id] = service
            server.attach(service)
            server.start()
        if self.model.encrypted:
            node_map = {NodeId(i): ep for i, ep in enumerate(self.node_endpoints)}
            for j, port in enumerate(proxy_ports):
                proxy = remote_proxy(self.proxy_config(j, port), self.master, node_map)
                self.proxies.append(proxy)
                server = ProxyServer(host, port, proxy).start()
                self.proxy_servers.append(server)
                self.proxy_endpoints.append(server.endpoint)

    def _up_multiprocess(self) -> None:
        host = self.config.host
        node_ports, proxy_ports = self._ports()
        if self.config.base_port == 0:
            node_ports = free_ports(host, len(node_ports))
            proxy_ports = free_ports(host, len(proxy_ports))
        self.node_endpoints = [(host, port) for port in node_ports]
        ctx = multiprocessing.get_context("spawn")
        level = logging.getLogger().level
        for index in range(len(node_ports)):
            process = ctx.Process(
                target=_node_process,
                args=(index, self.node_endpoints, self.deployment.replication_factor, self.config.service_delay_us, level),
                name=f"secnosql-node-{index}",
                daemon=True,
            )
            process.start()
            self.processes.append(process)
        for endpoint in self.node_endpoints:
            wait_until_listening(*endpoint)
        if self.model.encrypted:
            node_map = {NodeId(i): ep for i, ep in enumerate(self.node_endpoints)}
            for j, port in enumerate(proxy_ports):
                process = ctx.Process(
                    target=_proxy_process,
                    args=(self.proxy_config(j, port), self.master.to_hex(), node_map, level),
                    name=f"secnosql-proxy-{j}",
                    daemon=True,
                )
                process.start()
                self.processes.append(process)
                self.proxy_endpoints.append((host, port))
            for endpoint in self.proxy_endpoints:
                wait_until_listening(*endpoint)

    # ----- inspection -----

    def status(self) -> Dict[str, Any]:
        """Configured shape plus live endpoints and coordinator usage."""
        in_process = self.config.mode is RunMode.LOCAL
        nodes = []
        for i in range(self.deployment.node_count):
            entry: Dict[str, Any] = {"node": str(NodeId(i))}
            entry["endpoint"] = "in-process" if in_process else _fmt(self.node_endpoints[i]) if self.node_endpoints else None
            nodes.append(entry)
        proxies = []
        for j in range(self.proxy_count if self.model.encrypted else 0):
            cfg = self.proxy_config(j)
            entry = {
                "proxy": j,
                "coordinator_policy": cfg.coordinator_policy.value,
                "pinned_node": str(NodeId(cfg.pinned_node)),
                "endpoint": "in-process" if in_process else _fmt(self.proxy_endpoints[j]) if j < len(self.proxy_endpoints) else None,
            }
            if j < len(self.proxies):
                entry["coordinators_used"] = sorted(str(n) for n in self.proxies[j].coordinator_usage)
            proxies.append(entry)
        return {
            "running": self.running,
            "mode": self.config.mode.value,
            "deployment": self.deployment.to_dict(),
            "nodes": nodes,
            "proxies": proxies,
        }


# ========== child processes ==========

def _node_process(index: int, endpoints: List[Endpoint], replication_factor: int, delay_us: int, level: int) -> None:
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    serve_node(index, endpoints, replication_factor, delay_us)


def _proxy_process(config: ProxyConfig, master_hex: str, node_map: Dict[NodeId, Endpoint], level: int) -> None:
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    serve_proxy(config, MasterKey.from_hex(master_hex), node_map)


# ========== endpoint helpers ==========

def _fmt(endpoint: Endpoint) -> str:
    return f"{endpoint[0]}:{endpoint[1]}"


def probe(host: str, port: int, timeout: float = 0.5) -> bool:
    """True when something accepts connections on host:port."""
    try:
        with closing(socket.create_connection((host, port), timeout=timeout)):
            return True
    except OSError:
        return False


def wait_until_listening(host: str, port: int, timeout: float = STARTUP_TIMEOUT_S) -> None:
    deadline = time.monotonic() + timeout
    while not probe(host, port):
        if time.monotonic() > deadline:
            raise TimeoutError(f"Nothing listening on {host}:{port} after {timeout:.0f}s")
        time.sleep(0.05)


def wait_until_closed(host: str, port: int, timeout: float = 5.0) -> bool:
    deadline = time.monotonic() + timeout
    while probe(host, port, timeout=0.2):
        if time.monotonic() > deadline:
            logger.warning(f"[CLI] {host}:{port} still listening after teardown")
            return False
        time.sleep(0.05)
    return True


def free_ports(host: str, count: int) -> List[int]:
    sockets = []
    try:
        for _ in range(count):
            s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            s.bind((host, 0))
            sockets.append(s)
        return [s.getsockname()[1] for s in sockets]
    finally:
        for s in sockets:
            s.close()


# ========== state file (CLI up / status / down) ==========

STATE_FILE = "topology.json"


def write_state(state_dir: Path, topology: Topology) -> Path:
    state = topology.status()
    state["pid"] = os.getpid()
    path = Path(state_dir) / STATE_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(state, f, indent=2)
    return path


def read_state(state_dir: Path) -> Optional[Dict[str, Any]]:
    path = Path(state_dir) / STATE_FILE
    if not path.exists():
        return None
    with open(path, "r") as f:
        return json.load(f)


def clear_state(state_dir: Path) -> None:
    path = Path(state_dir) / STATE_FILE
    if path.exists():
        path.unlink()


def state_endpoints(state: Dict[str, Any]) -> List[Endpoint]:
    endpoints = []
    for entry in state.get("nodes", []) + state.get("proxies", []):
        value = entry.get("endpoint")
        if value and value != "in-process":
            host, _, port = value.rpartition(":")
            endpoints.append((host, int(port)))
    return endpoints

"""TCP front end of a SecureProxy."""

import logging
import threading
from typing import Dict, Optional, Tuple

from ..core import MasterKey, NodeId, ProxyConfig
from ..crypto import CipherSuite
from ..net import FramedServer
from ..store import RemoteCoordinator
from .engine import SecureProxy

logger = logging.getLogger(__name__)


class ProxyServer(FramedServer):
    tag = "PROXY"

    def __init__(self, host: str, port: int, proxy: SecureProxy):
        super().__init__(host, port, proxy.handle_payload)
        self.proxy = proxy


def remote_proxy(
    config: ProxyConfig,
    master: MasterKey,
    node_endpoints: Dict[NodeId, Tuple[str, int]],
) -> SecureProxy:
    """A proxy whose cluster is reached through node servers."""
    return SecureProxy(config, CipherSuite.from_master(master), RemoteCoordinator(node_endpoints))


def serve_proxy(
    config: ProxyConfig,
    master: MasterKey,
    node_endpoints: Dict[NodeId, Tuple[str, int]],
    stop_event: Optional[threading.Event] = None,
) -> None:
    """Run one proxy in the foreground until `stop_event` is set (or forever)."""
    proxy = remote_proxy(config, master, node_endpoints)
    server = ProxyServer(config.host, config.port, proxy).start()
    logger.info(
        f"[PROXY] proxy-{config.proxy_id} ready, policy {config.coordinator_policy.value}, "
        f"{len(node_endpoints)} nodes"
    )
    try:
        (stop_event or threading.Event()).wait()
    except KeyboardInterrupt:
        logger.info(f"[PROXY] proxy-{config.proxy_id} interrupted")
    finally:
        server.stop()
        proxy.close()

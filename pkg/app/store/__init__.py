"""Replicated wide-column store: ring placement, nodes, coordinator routing."""
from .ring import build_ring, replicas, replicas_for_key, ring_position
from .node import StorageNode
from .cluster import Cluster, ClusterBackend, NodeHandle
from .plain import PlainExecutor
from .remote import RemoteCoordinator, RemoteNode
from .server import NodeServer, NodeService, connect_node, local_services, serve_node

__all__ = [
    "build_ring",
    "replicas",
    "replicas_for_key",
    "ring_position",
    "StorageNode",
    "Cluster",
    "ClusterBackend",
    "NodeHandle",
    "PlainExecutor",
    "RemoteCoordinator",
    "RemoteNode",
    "NodeServer",
    "NodeService",
    "connect_node",
    "local_services",
    "serve_node",
]

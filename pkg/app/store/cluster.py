"""
Replicated cluster with coordinator routing at consistency ONE.

`ClusterBackend` is what a proxy talks to. `Cluster` implements it over
node handles (in-process StorageNodes or RemoteNode clients); the remote
coordinator client in `remote.py` implements it over the wire.
"""

import logging
import threading
import time
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Optional, Protocol, Tuple

from ..core import (
    BackendError,
    ClusterRing,
    EncryptedCommand,
    NodeId,
    QueryOp,
    SchemaError,
    StoredRow,
    StoreResult,
    StoreStatus,
)
from .node import StorageNode
from .ring import build_ring, replicas_for_key

logger = logging.getLogger(__name__)


class NodeHandle(Protocol):
    """Replica-local operations of one node."""
    node_id: NodeId

    def create_table(self, table: str, columns: Tuple[str, ...]) -> bool: ...

    def get(self, table: str, key: bytes) -> Optional[StoredRow]: ...

    def put(self, table: str, key: bytes, cells: Mapping[str, bytes], merge: bool = False) -> StoredRow: ...

    def delete(self, table: str, key: bytes) -> bool: ...


class ClusterBackend:
    """Coordinator-level row operations plus `route` for encrypted commands."""

    nodes: List[NodeId]

    def create_table(self, table: str, columns: Tuple[str, ...], coordinator: NodeId) -> None:
        raise NotImplementedError

    def get_row(self, table: str, key: bytes, coordinator: NodeId) -> StoreResult:
        raise NotImplementedError

    def put_row(
        self, table: str, key: bytes, cells: Mapping[str, bytes], coordinator: NodeId, merge: bool = False
    ) -> StoreResult:
        raise NotImplementedError

    def delete_row(self, table: str, key: bytes, coordinator: NodeId) -> StoreResult:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def route(self, cmd: EncryptedCommand, coordinator: NodeId) -> StoreResult:
        """Execute an encrypted command with `coordinator` as the routing node."""
        if cmd.op is QueryOp.CREATE_TABLE:
            self.create_table(cmd.table_pseudonym, cmd.projection_pseudonyms, coordinator)
            return StoreResult(StoreStatus.OK)

        if cmd.key_ct is None:
            raise SchemaError(f"{cmd.op.name} command carries no row key")
        key = cmd.key_ct.data

        if cmd.op is QueryOp.SELECT:
            return self.get_row(cmd.table_pseudonym, key, coordinator)
        if cmd.op is QueryOp.DELETE:
            return self.delete_row(cmd.table_pseudonym, key, coordinator)

        cells = {name: ct.data for name, ct in cmd.cells}
        return self.put_row(cmd.table_pseudonym, key, cells, coordinator, merge=cmd.op is QueryOp.UPDATE)


class Cluster(ClusterBackend):
    """Ring plus one handle per node. All replicas are assumed live."""

    def __init__(self, ring: ClusterRing, handles: Iterable[NodeHandle], service_delay_us: int = 0):
        self.ring = ring
        self.handles: Dict[NodeId, NodeHandle] = {h.node_id: h for h in handles}
        missing = [n for n in ring.nodes if n not in self.handles]
        if missing:
            raise ValueError(f"No handle for ring nodes {', '.join(map(str, missing))}")
        self.nodes = ring.nodes
        self.service_delay_us = service_delay_us
        self.coordinator_hits: Counter = Counter()
        self._hits_lock = threading.Lock()

    @classmethod
    def local(cls, node_count: int = 4, replication_factor: int = 4, service_delay_us: int = 0) -> "Cluster":
        """In-process cluster of fresh StorageNodes."""
        ring = build_ring(node_count, replication_factor)
        return cls(ring, [StorageNode(n) for n in ring.nodes], service_delay_us)

    def node(self, node_id: NodeId) -> NodeHandle:
        return self.handles[node_id]

    def replicas_of(self, key: bytes) -> List[NodeId]:
        return replicas_for_key(key, self.ring)

    def _enter(self, coordinator: NodeId) -> None:
        if coordinator not in self.handles:
            raise BackendError(f"Coordinator {coordinator} is not part of the ring")
        with self._hits_lock:
            self.coordinator_hits[coordinator] += 1
        if self.service_delay_us:
            time.sleep(self.service_delay_us / 1_000_000)

    # ----- coordinator operations -----

    def create_table(self, table: str, columns: Tuple[str, ...], coordinator: NodeId) -> None:
        self._enter(coordinator)
        for node in self.nodes:
            self.handles[node].create_table(table, tuple(columns))

    def get_row(self, table: str, key: bytes, coordinator: NodeId) -> StoreResult:
        self._enter(coordinator)
        last_error: Optional[Exception] = None
        for node in self.replicas_of(key):
            try:
                row = self.handles[node].get(table, key)
            except BackendError as e:
                last_error = e
                continue
            if row is None:
                return StoreResult(StoreStatus.NOT_FOUND)
            return StoreResult(StoreStatus.OK, row)
        raise BackendError(f"No replica reachable for read: {last_error}")

    def put_row(
        self, table: str, key: bytes, cells: Mapping[str, bytes], coordinator: NodeId, merge: bool = False
    ) -> StoreResult:
        self._enter(coordinator)
        first: Optional[StoredRow] = None
        failures = 0
        for node in self.replicas_of(key):
            try:
                row = self.handles[node].put(table, key, cells, merge)
            except BackendError as e:
                failures += 1
                logger.warning(f"[STORE] Replica write to {node} failed: {e}")
                continue
            if first is None:
                first = row
        if first is None:
            raise BackendError(f"No replica reachable for write ({failures} failures)")
        return StoreResult(StoreStatus.OK, first)

    def delete_row(self, table: str, key: bytes, coordinator: NodeId) -> StoreResult:
        self._enter(coordinator)
        removed = False
        reached = 0
        for node in self.replicas_of(key):
            try:
                removed = self.handles[node].delete(table, key) or removed
                reached += 1
            except BackendError as e:
                logger.warning(f"[STORE] Replica delete on {node} failed: {e}")
        if not reached:
            raise BackendError("No replica reachable for delete")
        return StoreResult(StoreStatus.OK if removed else StoreStatus.NOT_FOUND)

    # ----- test support -----

    def tamper(self, node: NodeId, table: str, key_ct: bytes, column_pseudonym: str, byte_index: int) -> None:
        """Flip one bit of a stored ciphertext on one replica."""
        handle = self.handles[node]
        if not isinstance(handle, StorageNode):
            raise TypeError("Only in-process nodes can be tampered with")
        handle.tamper(table, key_ct, column_pseudonym, byte_index)

    def serving_replica(self, key: bytes) -> NodeId:
        """Replica that answers reads of `key`."""
        return self.replicas_of(key)[0]

    def dump(self) -> List[bytes]:
        """Everything stored on every in-process node."""
        out: List[bytes] = []
        for handle in self.handles.values():
            if isinstance(handle, StorageNode):
                out.extend(handle.dump())
        return out

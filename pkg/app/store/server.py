"""
Standalone storage node: request dispatch plus its TCP server.

A node answers three families of requests:
  - replica-local row operations on its own StorageNode
  - coordinated row operations, routed to all replicas with itself as coordinator
  - NoEnc plaintext statements (CREATE_SCHEMA / PLAIN_QUERY)
"""

import logging
import threading
from typing import Dict, Optional, Sequence, Tuple

from ..core import (
    ErrorCode,
    NodeId,
    ProtocolError,
    SchemaDef,
    SecNoSqlError,
    StoreStatus,
)
from ..net import (
    FramedServer,
    Opcode,
    decode_create_schema,
    decode_query,
    decode_row_request,
    encode_error,
    encode_ok,
    encode_result,
    encode_rows,
    split_payload,
)
from .cluster import Cluster, ClusterBackend
from .node import StorageNode
from .plain import PlainExecutor
from .remote import RemoteNode
from .ring import build_ring

logger = logging.getLogger(__name__)

_COORDINATED = {Opcode.ROW_GET, Opcode.ROW_PUT, Opcode.ROW_DELETE, Opcode.TABLE_CREATE}
_REPLICA = {Opcode.REPLICA_GET, Opcode.REPLICA_PUT, Opcode.REPLICA_DELETE, Opcode.REPLICA_CREATE}


class NodeService:
    """Payload-in, payload-out handler of one storage node."""

    def __init__(self, node: StorageNode, cluster: ClusterBackend):
        self.node = node
        self.cluster = cluster
        self.plain = PlainExecutor(node, cluster, node.node_id)

    @property
    def node_id(self) -> NodeId:
        return self.node.node_id

    def handle_payload(self, payload: bytes) -> bytes:
        try:
            opcode, body = split_payload(payload)
            if opcode is Opcode.CREATE_SCHEMA:
                table, columns = decode_create_schema(body)
                return encode_result(self.plain.create_schema(SchemaDef(table, columns[0], tuple(columns[1:]))))
            if opcode is Opcode.PLAIN_QUERY:
                return encode_result(self.plain.execute(decode_query(body)))
            if opcode in _COORDINATED:
                return self._coordinated(opcode, body)
            if opcode in _REPLICA:
                return self._replica(opcode, body)
            raise ProtocolError(f"Opcode {opcode.name} is not served by storage nodes")
        except SecNoSqlError as e:
            return encode_error(ErrorCode(e.code or ErrorCode.BACKEND), str(e))

    def _coordinated(self, opcode: Opcode, body: bytes) -> bytes:
        if opcode is Opcode.TABLE_CREATE:
            table, columns = decode_create_schema(body)
            self.cluster.create_table(table, tuple(columns), self.node_id)
            return encode_ok()
        request = decode_row_request(opcode, body)
        if opcode is Opcode.ROW_GET:
            result = self.cluster.get_row(request.table, request.key, self.node_id)
            if not result.found:
                return encode_error(ErrorCode.NOT_FOUND, "Row not found")
            return encode_rows(sorted(result.row.cells.items()))
        if opcode is Opcode.ROW_PUT:
            cells = {name.decode("utf-8"): value for name, value in request.cells}
            result = self.cluster.put_row(request.table, request.key, cells, self.node_id, request.merge)
            return encode_rows(sorted(result.row.cells.items()))
        result = self.cluster.delete_row(request.table, request.key, self.node_id)
        if result.status is StoreStatus.NOT_FOUND:
            return encode_error(ErrorCode.NOT_FOUND, "Row not found")
        return encode_ok()

    def _replica(self, opcode: Opcode, body: bytes) -> bytes:
        if opcode is Opcode.REPLICA_CREATE:
            table, columns = decode_create_schema(body)
            self.node.create_table(table, tuple(columns))
            return encode_ok()
        request = decode_row_request(opcode, body)
        if opcode is Opcode.REPLICA_GET:
            row = self.node.get(request.table, request.key)
            if row is None:
                return encode_error(ErrorCode.NOT_FOUND, "Row not found")
            return encode_rows(sorted(row.cells.items()))
        if opcode is Opcode.REPLICA_PUT:
            cells = {name.decode("utf-8"): value for name, value in request.cells}
            row = self.node.put(request.table, request.key, cells, request.merge)
            return encode_rows(sorted(row.cells.items()))
        if not self.node.delete(request.table, request.key):
            return encode_error(ErrorCode.NOT_FOUND, "Row not found")
        return encode_ok()


class NodeServer(FramedServer):
    tag = "NODE"

    def __init__(self, host: str, port: int, service: Optional[NodeService] = None):
        super().__init__(host, port, self._not_ready)
        self.service: Optional[NodeService] = None
        if service is not None:
            self.attach(service)

    def attach(self, service: NodeService) -> None:
        """Bind the node service; lets ephemeral ports be known before peers are wired."""
        self.service = service
        self.handler = service.handle_payload

    @staticmethod
    def _not_ready(payload: bytes) -> bytes:
        return encode_error(ErrorCode.BACKEND, "Node is starting")


def connect_node(
    index: int,
    endpoints: Sequence[Tuple[str, int]],
    replication_factor: int,
    service_delay_us: int = 0,
) -> NodeService:
    """
    Build the service of node `index` in a networked cluster.

    Peers are reached through RemoteNode handles; connections are opened
    lazily so every node may be created before any peer listens.
    """
    ring = build_ring(len(endpoints), replication_factor)
    node = StorageNode(NodeId(index))
    handles = []
    for node_id in ring.nodes:
        if node_id.index == index:
            handles.append(node)
        else:
            host, port = endpoints[node_id.index]
            handles.append(RemoteNode(node_id, host, port))
    return NodeService(node, Cluster(ring, handles, service_delay_us))


def serve_node(
    index: int,
    endpoints: Sequence[Tuple[str, int]],
    replication_factor: int,
    service_delay_us: int = 0,
    stop_event: Optional[threading.Event] = None,
) -> None:
    """Run node `index` in the foreground until `stop_event` is set (or forever)."""
    service = connect_node(index, endpoints, replication_factor, service_delay_us)
    host, port = endpoints[index]
    server = NodeServer(host, port, service).start()
    try:
        (stop_event or threading.Event()).wait()
    except KeyboardInterrupt:
        logger.info(f"[STORE] node-{index} interrupted")
    finally:
        server.stop()
        for handle in service.cluster.handles.values():
            if isinstance(handle, RemoteNode):
                handle.close()


def local_services(cluster: Cluster) -> Dict[NodeId, NodeService]:
    """NodeService views over an in-process cluster, one per node."""
    return {node_id: NodeService(handle, cluster) for node_id, handle in cluster.handles.items()}

"""
Wire clients of storage nodes.

RemoteNode is a replica-local handle (0x2x opcodes) used by a coordinator
node to reach its peers. RemoteCoordinator is the proxy-side backend: it
sends 0x1x opcodes to the chosen coordinator, which routes to replicas.
"""

from typing import Dict, Mapping, Optional, Tuple

from ..core import (
    BackendError,
    ErrorCode,
    IntegrityError,
    NodeId,
    NotFoundError,
    ProtocolError,
    QueryParseError,
    SchemaError,
    StoredRow,
    StoreResult,
    StoreStatus,
)
from ..net import (
    ChannelPool,
    Opcode,
    Tap,
    decode_error,
    decode_rows,
    encode_create_schema,
    encode_row_delete,
    encode_row_get,
    encode_row_put,
    split_payload,
)
from .cluster import ClusterBackend

Endpoint = Tuple[str, int]

_ERRORS = {
    ErrorCode.NOT_FOUND: NotFoundError,
    ErrorCode.INTEGRITY_FAILURE: IntegrityError,
    ErrorCode.PARSE: QueryParseError,
    ErrorCode.SCHEMA: SchemaError,
    ErrorCode.BACKEND: BackendError,
}


def _expect(payload: bytes, *accepted: Opcode) -> Tuple[Opcode, bytes]:
    """Split a node response, re-raising ERROR frames as exceptions."""
    opcode, body = split_payload(payload)
    if opcode is Opcode.ERROR:
        code, message = decode_error(body)
        try:
            error_cls = _ERRORS[ErrorCode(code)]
        except ValueError:
            raise BackendError(f"Node answered unknown error code {code}: {message}") from None
        raise error_cls(message)
    if opcode not in accepted:
        raise ProtocolError(f"Unexpected {opcode.name} response from node")
    return opcode, body


def _to_cells(raw) -> Dict[str, bytes]:
    return {name.decode("utf-8"): value for name, value in raw}


def _row_request(pool: ChannelPool, payload: bytes) -> bytes:
    try:
        return pool.request(payload)
    except ProtocolError as e:
        raise BackendError(str(e)) from e


class RemoteNode:
    """NodeHandle for a peer reached over TCP."""

    def __init__(self, node_id: NodeId, host: str, port: int, tap: Optional[Tap] = None):
        self.node_id = node_id
        self.pool = ChannelPool(host, port, tap)

    def create_table(self, table: str, columns: Tuple[str, ...]) -> bool:
        _expect(_row_request(self.pool, encode_create_schema(table, columns, Opcode.REPLICA_CREATE)), Opcode.OK)
        return True

    def get(self, table: str, key: bytes) -> Optional[StoredRow]:
        try:
            _, body = _expect(_row_request(self.pool, encode_row_get(table, key, Opcode.REPLICA_GET)), Opcode.ROWS)
        except NotFoundError:
            return None
        return StoredRow(key_ct=key, cells=_to_cells(decode_rows(body)))

    def put(self, table: str, key: bytes, cells: Mapping[str, bytes], merge: bool = False) -> StoredRow:
        payload = encode_row_put(table, key, sorted(cells.items()), merge, Opcode.REPLICA_PUT)
        _, body = _expect(_row_request(self.pool, payload), Opcode.ROWS)
        return StoredRow(key_ct=key, cells=_to_cells(decode_rows(body)))

    def delete(self, table: str, key: bytes) -> bool:
        try:
            _expect(_row_request(self.pool, encode_row_delete(table, key, Opcode.REPLICA_DELETE)), Opcode.OK)
        except NotFoundError:
            return False
        return True

    def close(self) -> None:
        self.pool.close()


class RemoteCoordinator(ClusterBackend):
    """ClusterBackend over node servers; the coordinator argument picks the endpoint."""

    def __init__(self, endpoints: Mapping[NodeId, Endpoint], tap: Optional[Tap] = None):
        if not endpoints:
            raise ValueError("At least one node endpoint is required")
        self.nodes = sorted(endpoints)
        self.pools = {node: ChannelPool(host, port, tap) for node, (host, port) in endpoints.items()}

    def _pool(self, coordinator: NodeId) -> ChannelPool:
        pool = self.pools.get(coordinator)
        if pool is None:
            raise BackendError(f"Coordinator {coordinator} is not part of the ring")
        return pool

    def create_table(self, table: str, columns: Tuple[str, ...], coordinator: NodeId) -> None:
        payload = encode_create_schema(table, columns, Opcode.TABLE_CREATE)
        _expect(_row_request(self._pool(coordinator), payload), Opcode.OK)

    def get_row(self, table: str, key: bytes, coordinator: NodeId) -> StoreResult:
        try:
            _, body = _expect(_row_request(self._pool(coordinator), encode_row_get(table, key)), Opcode.ROWS)
        except NotFoundError:
            return StoreResult(StoreStatus.NOT_FOUND)
        return StoreResult(StoreStatus.OK, StoredRow(key_ct=key, cells=_to_cells(decode_rows(body))))

    def put_row(
        self, table: str, key: bytes, cells: Mapping[str, bytes], coordinator: NodeId, merge: bool = False
    ) -> StoreResult:
        payload = encode_row_put(table, key, sorted(cells.items()), merge)
        _, body = _expect(_row_request(self._pool(coordinator), payload), Opcode.ROWS)
        return StoreResult(StoreStatus.OK, StoredRow(key_ct=key, cells=_to_cells(decode_rows(body))))

    def delete_row(self, table: str, key: bytes, coordinator: NodeId) -> StoreResult:
        try:
            _expect(_row_request(self._pool(coordinator), encode_row_delete(table, key)), Opcode.OK)
        except NotFoundError:
            return StoreResult(StoreStatus.NOT_FOUND)
        return StoreResult(StoreStatus.OK)

    def close(self) -> None:
        for pool in self.pools.values():
            pool.close()

"""
The secure proxy: translates plaintext statements into encrypted commands,
keeps the integrity ledger and verifies every row it reads back.

Requests are executed on a bounded worker pool; that pool is the proxy's
capacity. Writes and reads of the same (table, key) are serialized by a
striped lock so a read always sees a matching (row, tag) pair.
"""

import itertools
import logging
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from ..core import (
    Ciphertext,
    CoordinatorPolicy,
    ErrorCode,
    IntegrityError,
    NodeId,
    ProtocolError,
    ProxyConfig,
    QueryAst,
    QueryOp,
    QueryParseError,
    QueryResult,
    Scheme,
    SchemaDef,
    SecNoSqlError,
    StoreStatus,
)
from ..crypto import CipherSuite
from ..net import (
    Opcode,
    decode_create_schema,
    decode_query,
    encode_error,
    encode_result,
    split_payload,
)
from ..query import SchemaCatalog, decrypt_row, parse, translate
from ..store import ClusterBackend
from .integrity import IntegrityLedger, canonical_serialize

logger = logging.getLogger(__name__)

KEY_LOCK_STRIPES = 256


class SecureProxy:
    """Trusted middle tier between clients and the storage cluster."""

    def __init__(
        self,
        config: ProxyConfig,
        suite: CipherSuite,
        backend: ClusterBackend,
        ledger: Optional[IntegrityLedger] = None,
    ):
        if not backend.nodes:
            raise ValueError("Proxy needs at least one cluster node")
        self.config = config
        self.suite = suite
        self.backend = backend
        self.ledger = ledger if ledger is not None else IntegrityLedger(config.ledger_path)
        self.catalog = SchemaCatalog()
        self.coordinator_usage: Counter = Counter()

        self._nodes: List[NodeId] = list(backend.nodes)
        self._rotation = itertools.cycle(self._nodes)
        self._rotation_lock = threading.Lock()
        self._key_locks = [threading.Lock() for _ in range(KEY_LOCK_STRIPES)]
        self._pool = ThreadPoolExecutor(
            max_workers=max(1, config.workers),
            thread_name_prefix=f"proxy-{config.proxy_id}",
        )
        self._closed = False

    @property
    def tag(self) -> str:
        return f"PROXY {self.config.proxy_id}"

    # ----- wire entry point -----

    def handle_payload(self, payload: bytes) -> bytes:
        """Bit-exact request in, response out, executed on the worker pool."""
        if self._closed:
            return encode_error(ErrorCode.BACKEND, "Proxy is shut down")
        return self._pool.submit(self._dispatch, payload).result()

    def _dispatch(self, payload: bytes) -> bytes:
        try:
            opcode, body = split_payload(payload)
            if opcode is Opcode.CREATE_SCHEMA:
                table, columns = decode_create_schema(body)
                return encode_result(self.handle_create_schema(table, columns))
            if opcode is Opcode.QUERY:
                return encode_result(self.handle_query(decode_query(body)))
            raise ProtocolError(f"Opcode {opcode.name} is not accepted by a proxy")
        except ProtocolError as e:
            return encode_error(ErrorCode.PARSE, str(e))
        except Exception as e:
            logger.exception(f"[{self.tag}] Unhandled error while serving a request")
            return encode_error(ErrorCode.BACKEND, f"Internal error: {type(e).__name__}")

    # ----- coordinator choice -----

    def pick_coordinator(self) -> NodeId:
        if self.config.coordinator_policy is CoordinatorPolicy.ROTATE:
            with self._rotation_lock:
                node = next(self._rotation)
        else:
            node = self._nodes[self.config.pinned_node % len(self._nodes)]
        with self._rotation_lock:
            first_use = node not in self.coordinator_usage
            self.coordinator_usage[node] += 1
        if first_use:
            logger.info(f"[{self.tag}] Using coordinator {node}")
        return node

    def _lock_for(self, table: str, key: bytes) -> threading.Lock:
        return self._key_locks[hash((table, key)) % KEY_LOCK_STRIPES]

    # ----- handlers -----

    def handle_create_schema(self, table: str, columns: Sequence[str]) -> QueryResult:
        return self._guard(self._create_schema, table, columns)

    def handle_query(self, text: str) -> QueryResult:
        """Dispatch any supported statement by its kind."""
        def run():
            ast = self._parse(text)
            if ast.op is QueryOp.CREATE_TABLE:
                return self._create_schema(ast.table, ast.columns)
            if ast.op.is_write:
                return self._write(ast)
            if ast.op is QueryOp.SELECT:
                return self._read(ast)
            return self._delete(ast)
        return self._guard(run)

    def handle_write(self, text: str) -> QueryResult:
        return self._guard(lambda: self._write(self._parse(text, (QueryOp.INSERT, QueryOp.UPDATE))))

    def handle_read(self, text: str) -> QueryResult:
        return self._guard(lambda: self._read(self._parse(text, (QueryOp.SELECT,))))

    def handle_delete(self, text: str) -> QueryResult:
        return self._guard(lambda: self._delete(self._parse(text, (QueryOp.DELETE,))))

    def _guard(self, fn, *args) -> QueryResult:
        try:
            return fn(*args)
        except SecNoSqlError as e:
            code = ErrorCode(e.code) if e.code else ErrorCode.BACKEND
            # messages may hold plaintext names; log the code only
            logger.debug(f"[{self.tag}] Request failed with {code.name}")
            return QueryResult(error_code=code, message=str(e))

    def _parse(self, text: str, allowed: Optional[Tuple[QueryOp, ...]] = None) -> QueryAst:
        ast = parse(text, self.catalog.key_columns())
        if allowed is not None and ast.op not in allowed:
            raise QueryParseError(f"{ast.op.name} is not allowed here", 0)
        return ast

    def _create_schema(self, table: str, columns: Sequence[str]) -> QueryResult:
        schema = SchemaDef(table, columns[0], tuple(columns[1:]))
        created = self.catalog.register(schema)
        cmd = translate(QueryAst(op=QueryOp.CREATE_TABLE, table=table, columns=schema.columns), schema, self.suite.keys)
        self.backend.route(cmd, self.pick_coordinator())
        if created:
            logger.info(f"[{self.tag}] Registered table {cmd.table_pseudonym} with {len(schema.columns)} columns")
        return QueryResult()

    def _write(self, ast: QueryAst) -> QueryResult:
        schema = self.catalog.get(ast.table)
        cmd = translate(ast, schema, self.suite.keys)
        table, key = cmd.table_pseudonym, cmd.key_ct.data
        new_cells = {name: ct.data for name, ct in cmd.cells}

        with self._lock_for(table, key):
            coordinator = self.pick_coordinator()
            if ast.op is QueryOp.UPDATE:
                current = self.backend.get_row(table, key, coordinator)
                cells: Dict[str, bytes] = {}
                if current.found:
                    # never fold an unverified row into a freshly tagged one
                    self._verify(table, key, current.row.cells)
                    cells.update(current.row.cells)
                cells.update(new_cells)
            else:
                cells = new_cells
            tag = self.suite.tag(canonical_serialize(table, key, cells.items()))
            self.backend.put_row(table, key, cells, coordinator)
            self.ledger.put(table, key, tag)
        return QueryResult()

    def _read(self, ast: QueryAst) -> QueryResult:
        schema = self.catalog.get(ast.table)
        cmd = translate(ast, schema, self.suite.keys)
        table, key = cmd.table_pseudonym, cmd.key_ct.data

        with self._lock_for(table, key):
            result = self.backend.get_row(table, key, self.pick_coordinator())
            if not result.found:
                return QueryResult(error_code=ErrorCode.NOT_FOUND, message="Row not found")
            self._verify(table, key, result.row.cells)
            stored = result.row.cells

        wanted = [p for p in cmd.projection_pseudonyms if p in stored]
        decrypted = dict(decrypt_row(
            ((p, Ciphertext.from_bytes(Scheme.RND, stored[p])) for p in wanted),
            schema,
            self.suite.keys,
        ))
        projection = schema.columns if ast.select_all else ast.projection
        cells = []
        for column in projection:
            if column == schema.key_column:
                cells.append((column, ast.key_value))
            elif column in decrypted:
                cells.append((column, decrypted[column]))
        return QueryResult(cells=tuple(cells), rows=True)

    def _delete(self, ast: QueryAst) -> QueryResult:
        schema = self.catalog.get(ast.table)
        cmd = translate(ast, schema, self.suite.keys)
        table, key = cmd.table_pseudonym, cmd.key_ct.data
        with self._lock_for(table, key):
            result = self.backend.route(cmd, self.pick_coordinator())
            if result.status is StoreStatus.NOT_FOUND:
                return QueryResult(error_code=ErrorCode.NOT_FOUND, message="Row not found")
            self.ledger.remove(table, key)
        return QueryResult()

    def _verify(self, table: str, key: bytes, cells: Dict[str, bytes]) -> None:
        tag = self.ledger.get(table, key)
        if tag is None:
            logger.warning(f"[{self.tag}] No ledger entry for a stored row of {table}")
            raise IntegrityError("Row has no integrity tag")
        if not self.suite.verify(canonical_serialize(table, key, cells.items()), tag):
            logger.warning(f"[{self.tag}] Integrity check failed for a row of {table}")
            raise IntegrityError("Row failed integrity verification")

    # ----- lifecycle -----

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._pool.shutdown(wait=True)
        self.ledger.close()
        self.backend.close()

"""
Plaintext statement execution for the NoEnc model: clients talk to a
coordinator node directly and rows are stored unencrypted.
"""

import logging
from typing import Dict, Optional

from ..core import (
    NodeId,
    QueryAst,
    QueryOp,
    QueryResult,
    SchemaDef,
    SchemaError,
    SecNoSqlError,
    StoreStatus,
    ErrorCode,
)
from ..query import parse
from .cluster import ClusterBackend
from .node import StorageNode

logger = logging.getLogger(__name__)


class PlainExecutor:
    """Runs parsed statements against the cluster with `coordinator` routing."""

    def __init__(self, node: StorageNode, cluster: ClusterBackend, coordinator: NodeId):
        self.node = node
        self.cluster = cluster
        self.coordinator = coordinator

    def schema(self, table: str) -> SchemaDef:
        # every node holds every table definition, so the local node is authoritative
        columns = self.node.table_columns(table)
        if columns is None:
            raise SchemaError(f"Unknown table '{table}'")
        return SchemaDef(table, columns[0], columns[1:])

    def key_columns(self) -> Dict[str, str]:
        return self.node.key_columns()

    def create_schema(self, schema: SchemaDef) -> QueryResult:
        existing = self.node.table_columns(schema.table)
        if existing is not None and existing != schema.columns:
            raise SchemaError(f"Table '{schema.table}' already exists with a different definition")
        self.cluster.create_table(schema.table, schema.columns, self.coordinator)
        return QueryResult()

    def execute(self, text: str) -> QueryResult:
        try:
            ast = parse(text, self.key_columns())
            return self._execute(ast)
        except SecNoSqlError as e:
            logger.debug(f"[STORE] Plain statement failed with code {e.code}")
            return QueryResult(error_code=ErrorCode(e.code or ErrorCode.BACKEND), message=str(e))

    def _execute(self, ast: QueryAst) -> QueryResult:
        if ast.op is QueryOp.CREATE_TABLE:
            return self.create_schema(SchemaDef(ast.table, ast.columns[0], ast.columns[1:]))

        schema = self.schema(ast.table)
        if ast.key_column != schema.key_column:
            raise SchemaError(f"'{ast.key_column}' is not the partition key of '{schema.table}'")
        key = ast.key_value.encode("utf-8")

        if ast.op in (QueryOp.INSERT, QueryOp.UPDATE):
            for column, _ in ast.assignments:
                if column not in schema.value_columns:
                    raise SchemaError(f"Unknown column '{column}' in table '{schema.table}'")
            cells = {column: value.encode("utf-8") for column, value in ast.assignments}
            self.cluster.put_row(schema.table, key, cells, self.coordinator, merge=ast.op is QueryOp.UPDATE)
            return QueryResult()

        if ast.op is QueryOp.SELECT:
            projection = schema.columns if ast.select_all else ast.projection
            for column in projection:
                if not schema.has_column(column):
                    raise SchemaError(f"Unknown column '{column}' in table '{schema.table}'")
            result = self.cluster.get_row(schema.table, key, self.coordinator)
            if not result.found:
                return QueryResult(error_code=ErrorCode.NOT_FOUND, message="Row not found")
            return QueryResult(cells=tuple(self._project(projection, schema, ast.key_value, result.row.cells)), rows=True)

        result = self.cluster.delete_row(schema.table, key, self.coordinator)
        if result.status is StoreStatus.NOT_FOUND:
            return QueryResult(error_code=ErrorCode.NOT_FOUND, message="Row not found")
        return QueryResult()

    @staticmethod
    def _project(projection, schema: SchemaDef, key_value: str, cells: Dict[str, bytes]):
        for column in projection:
            if column == schema.key_column:
                yield column, key_value
                continue
            value: Optional[bytes] = cells.get(column)
            if value is not None:
                yield column, value.decode("utf-8", "replace")

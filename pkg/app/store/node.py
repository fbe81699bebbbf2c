"""
In-memory wide-column storage node.

Tables map a row key to an immutable StoredRow. Writes to the same key are
serialized through a striped lock; readers always see a whole row.
"""

import logging
import threading
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from ..core import NodeId, SchemaError, StoredRow

logger = logging.getLogger(__name__)

LOCK_STRIPES = 64


class StorageNode:
    """One replica holder. Knows nothing about encryption."""

    def __init__(self, node_id: NodeId, lock_stripes: int = LOCK_STRIPES):
        self.node_id = node_id
        self._columns: Dict[str, Tuple[str, ...]] = {}
        self._tables: Dict[str, Dict[bytes, StoredRow]] = {}
        self._tables_lock = threading.Lock()
        self._stripes = [threading.Lock() for _ in range(lock_stripes)]

    def __repr__(self) -> str:
        return f"StorageNode({self.node_id})"

    # ----- tables -----

    def create_table(self, table: str, columns: Tuple[str, ...]) -> bool:
        """Declare a table. Identical re-creation is a no-op returning False."""
        columns = tuple(columns)
        with self._tables_lock:
            existing = self._columns.get(table)
            if existing is not None:
                if existing != columns:
                    raise SchemaError(f"Table {table} already exists with different columns")
                return False
            self._columns[table] = columns
            self._tables[table] = {}
        logger.debug(f"[STORE] {self.node_id} created table {table}")
        return True

    def table_columns(self, table: str) -> Optional[Tuple[str, ...]]:
        with self._tables_lock:
            return self._columns.get(table)

    def key_columns(self) -> Dict[str, str]:
        """table -> first (partition key) column."""
        with self._tables_lock:
            return {table: columns[0] for table, columns in self._columns.items()}

    def _rows(self, table: str) -> Dict[bytes, StoredRow]:
        rows = self._tables.get(table)
        if rows is None:
            raise SchemaError(f"Unknown table {table}")
        return rows

    def _lock_for(self, table: str, key: bytes) -> threading.Lock:
        return self._stripes[hash((table, key)) % len(self._stripes)]

    # ----- rows -----

    def get(self, table: str, key: bytes) -> Optional[StoredRow]:
        return self._rows(table).get(key)

    def put(self, table: str, key: bytes, cells: Mapping[str, bytes], merge: bool = False) -> StoredRow:
        """Replace the row (or merge cells into it) and return the new row."""
        rows = self._rows(table)
        allowed = self._columns[table]
        for name in cells:
            if name not in allowed:
                raise SchemaError(f"Column {name} is not part of table {table}")
        with self._lock_for(table, key):
            new_cells = dict(rows[key].cells) if merge and key in rows else {}
            new_cells.update(cells)
            row = StoredRow(key_ct=key, cells=new_cells)
            rows[key] = row
        return row

    def delete(self, table: str, key: bytes) -> bool:
        rows = self._rows(table)
        with self._lock_for(table, key):
            return rows.pop(key, None) is not None

    # ----- test support -----

    def tamper(self, table: str, key: bytes, column: str, byte_index: int, mask: int = 0x01) -> None:
        """Flip bits of one stored cell, bypassing every client path."""
        rows = self._rows(table)
        with self._lock_for(table, key):
            row = rows.get(key)
            if row is None or column not in row.cells:
                raise KeyError(f"No cell {column} for that key")
            value = bytearray(row.cells[column])
            value[byte_index % len(value)] ^= mask
            cells = dict(row.cells)
            cells[column] = bytes(value)
            rows[key] = StoredRow(key_ct=key, cells=cells)

    def replace_row(self, table: str, key: bytes, cells: Mapping[str, bytes]) -> None:
        """Install a row verbatim (replay / splice attacks in tests)."""
        rows = self._rows(table)
        with self._lock_for(table, key):
            rows[key] = StoredRow(key_ct=key, cells=dict(cells))

    def dump(self) -> Iterator[bytes]:
        """Every byte string the node holds: table names, keys, cell names and values."""
        with self._tables_lock:
            tables: List[Tuple[str, Tuple[str, ...], List[StoredRow]]] = [
                (name, self._columns[name], list(rows.values())) for name, rows in self._tables.items()
            ]
        for name, columns, rows in tables:
            yield name.encode("utf-8")
            for column in columns:
                yield column.encode("utf-8")
            for row in rows:
                yield row.key_ct
                for cell_name, value in row.cells.items():
                    yield cell_name.encode("utf-8")
                    yield value

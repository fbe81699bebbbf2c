"""Registry of plaintext schemas known to a proxy (or a NoEnc node)."""

import threading
from typing import Dict, Optional

from ..core import SchemaDef, SchemaError


class SchemaCatalog:
    """Thread-safe table -> SchemaDef map. Definitions never change once set."""

    def __init__(self):
        self._lock = threading.Lock()
        self._schemas: Dict[str, SchemaDef] = {}

    def register(self, schema: SchemaDef) -> bool:
        """
        Register a schema.

        Returns True when newly created, False for an identical re-create.
        Raises SchemaError on a conflicting redefinition.
        """
        with self._lock:
            existing = self._schemas.get(schema.table)
            if existing is None:
                self._schemas[schema.table] = schema
                return True
            if existing != schema:
                raise SchemaError(f"Table '{schema.table}' already exists with a different definition")
            return False

    def get(self, table: str) -> SchemaDef:
        schema = self.find(table)
        if schema is None:
            raise SchemaError(f"Unknown table '{table}'")
        return schema

    def find(self, table: str) -> Optional[SchemaDef]:
        with self._lock:
            return self._schemas.get(table)

    def key_columns(self) -> Dict[str, str]:
        with self._lock:
            return {name: schema.key_column for name, schema in self._schemas.items()}

    def __len__(self) -> int:
        with self._lock:
            return len(self._schemas)

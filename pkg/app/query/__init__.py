"""CQL-subset parsing and encrypted query translation."""
from .catalog import SchemaCatalog
from .parser import parse, tokenize
from .translator import column_pseudonyms, decrypt_row, table_pseudonym, translate

__all__ = [
    "SchemaCatalog",
    "parse",
    "tokenize",
    "column_pseudonyms",
    "decrypt_row",
    "table_pseudonym",
    "translate",
]

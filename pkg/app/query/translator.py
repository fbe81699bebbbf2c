"""
Plaintext statement -> encrypted command translation, and the reverse
mapping for result rows.

Table and column names become HMAC pseudonyms, the partition key is
DET-encrypted so it can be looked up, every other value is RND-encrypted.
"""

from functools import lru_cache
from typing import Iterable, List, Tuple

from ..core import (
    Ciphertext,
    DecryptionError,
    EncryptedCommand,
    KeySet,
    NameKind,
    QueryAst,
    QueryOp,
    SchemaDef,
    SchemaError,
    UnsupportedPredicateError,
)
from ..crypto import anonymize_name, det_encrypt, rnd_decrypt, rnd_encrypt


@lru_cache(maxsize=256)
def column_pseudonyms(schema: SchemaDef, keys: KeySet) -> dict[str, str]:
    """column name -> pseudonym, for every column of the schema (key first)."""
    return {name: anonymize_name(keys, NameKind.COLUMN, name) for name in schema.columns}


@lru_cache(maxsize=256)
def reverse_pseudonyms(schema: SchemaDef, keys: KeySet) -> dict[str, str]:
    return {pseudo: name for name, pseudo in column_pseudonyms(schema, keys).items()}


@lru_cache(maxsize=256)
def table_pseudonym(table: str, keys: KeySet) -> str:
    return anonymize_name(keys, NameKind.TABLE, table)


def _check_value_columns(schema: SchemaDef, columns: Iterable[str]) -> None:
    for column in columns:
        if column == schema.key_column:
            raise SchemaError(f"Partition key '{column}' cannot be assigned")
        if column not in schema.value_columns:
            raise SchemaError(f"Unknown column '{column}' in table '{schema.table}'")


def _check_key_predicate(ast: QueryAst, schema: SchemaDef) -> None:
    if ast.key_value is None:
        raise UnsupportedPredicateError("Statement must restrict the partition key", 0)
    if ast.key_column != schema.key_column:
        if ast.op is QueryOp.INSERT:
            raise SchemaError(
                f"First INSERT column must be the partition key '{schema.key_column}', got '{ast.key_column}'"
            )
        raise UnsupportedPredicateError(
            f"WHERE column '{ast.key_column}' is not the partition key of '{schema.table}'", 0
        )


def translate(ast: QueryAst, schema: SchemaDef, keys: KeySet) -> EncryptedCommand:
    """Anonymize names and encrypt values of one statement."""
    if ast.table != schema.table:
        raise SchemaError(f"Statement targets '{ast.table}' but schema is '{schema.table}'")

    names = column_pseudonyms(schema, keys)
    table = table_pseudonym(schema.table, keys)

    if ast.op is QueryOp.CREATE_TABLE:
        return EncryptedCommand(
            op=ast.op,
            table_pseudonym=table,
            projection_pseudonyms=tuple(names[c] for c in schema.columns),
        )

    _check_key_predicate(ast, schema)
    key_ct = det_encrypt(keys, ast.key_value.encode("utf-8"))

    if ast.op in (QueryOp.INSERT, QueryOp.UPDATE):
        if ast.op is QueryOp.UPDATE and not ast.assignments:
            raise SchemaError("UPDATE needs at least one assignment")
        _check_value_columns(schema, (c for c, _ in ast.assignments))
        cells = tuple(
            (names[column], rnd_encrypt(keys, value.encode("utf-8")))
            for column, value in ast.assignments
        )
        return EncryptedCommand(op=ast.op, table_pseudonym=table, key_ct=key_ct, cells=cells)

    if ast.op is QueryOp.SELECT:
        if ast.select_all:
            projection = schema.columns
        else:
            for column in ast.projection:
                if not schema.has_column(column):
                    raise SchemaError(f"Unknown column '{column}' in table '{schema.table}'")
            projection = ast.projection
        return EncryptedCommand(
            op=ast.op,
            table_pseudonym=table,
            key_ct=key_ct,
            projection_pseudonyms=tuple(names[c] for c in projection),
        )

    # DELETE
    return EncryptedCommand(op=ast.op, table_pseudonym=table, key_ct=key_ct)


def decrypt_row(
    cells: Iterable[Tuple[str, Ciphertext]],
    schema: SchemaDef,
    keys: KeySet,
) -> List[Tuple[str, str]]:
    """Restore plaintext column names and values of a stored row."""
    reverse = reverse_pseudonyms(schema, keys)
    result = []
    for pseudonym, ct in cells:
        column = reverse.get(pseudonym)
        if column is None:
            raise SchemaError(f"Pseudonym {pseudonym} does not belong to table '{schema.table}'")
        try:
            value = rnd_decrypt(keys, ct).decode("utf-8")
        except UnicodeDecodeError:
            raise DecryptionError(f"Decrypted value of column '{column}' is not UTF-8") from None
        result.append((column, value))
    return result

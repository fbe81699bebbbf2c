"""Parser, schema catalog and encrypted translation."""

import numpy as np
import pytest

from app.core import (
    QueryOp,
    QueryParseError,
    SchemaDef,
    SchemaError,
    Scheme,
    UnsupportedPredicateError,
)
from app.crypto import det_encrypt, rnd_decrypt
from app.query import SchemaCatalog, column_pseudonyms, decrypt_row, parse, table_pseudonym, tokenize, translate

USERS = SchemaDef("users", "user_id", ("name", "email"))


# ========== parser ==========

def test_parse_insert():
    ast = parse("INSERT INTO users (user_id, name, email) VALUES ('u1', 'Ann', 'a@x.org');")
    assert ast.op is QueryOp.INSERT
    assert ast.table == "users"
    assert ast.key_column == "user_id"
    assert ast.key_value == "u1"
    assert ast.assignments == (("name", "Ann"), ("email", "a@x.org"))


def test_parse_select_projection_and_star():
    ast = parse("select name, email from users where user_id = 'u1'")
    assert ast.op is QueryOp.SELECT
    assert ast.projection == ("name", "email")
    assert not ast.select_all
    assert parse("SELECT * FROM users WHERE user_id = 'u1'").select_all


def test_parse_update_and_delete():
    ast = parse("UPDATE users SET name = 'Bo', email = 'b@x' WHERE user_id = 'u2'")
    assert ast.op is QueryOp.UPDATE
    assert ast.assignments == (("name", "Bo"), ("email", "b@x"))
    assert ast.key_value == "u2"
    ast = parse("DELETE FROM users WHERE user_id = 'u2'")
    assert ast.op is QueryOp.DELETE and ast.key_value == "u2"


def test_parse_create_table():
    ast = parse("CREATE TABLE users (user_id, name, email)")
    assert ast.op is QueryOp.CREATE_TABLE
    assert ast.columns == ("user_id", "name", "email")
    assert ast.key_column == "user_id"


def test_quote_escape_and_unicode_literal():
    ast = parse("INSERT INTO users (user_id, name) VALUES ('u''1', 'Zoë')")
    assert ast.key_value == "u'1"
    assert ast.assignments == (("name", "Zoë"),)


@pytest.mark.parametrize(
    "text, offset",
    [
        ("", 0),
        ("DROP TABLE users", 0),
        ("SELECT * FROM users WHERE user_id = 'u1' extra", 41),
        ("INSERT INTO users (a, b) VALUES ('x')", 19),
        ("SELECT * FROM users WHERE user_id = 'open", 36),
        ("SELECT * FROM users WHERE user_id = u1", 36),
        ("SELECT * FROM users @", 20),
    ],
)
def test_parse_errors_carry_byte_offset(text, offset):
    with pytest.raises(QueryParseError) as info:
        parse(text)
    assert info.value.offset == offset
    assert info.value.code == 3


def test_error_offset_counts_utf8_bytes():
    with pytest.raises(QueryParseError) as info:
        parse("SELECT * FROM users WHERE user_id = 'é' ?")
    assert info.value.offset == len("SELECT * FROM users WHERE user_id = 'é' ".encode("utf-8"))


@pytest.mark.parametrize(
    "text",
    [
        "SELECT * FROM users WHERE user_id > 'u1'",
        "SELECT * FROM users WHERE user_id <= 'u1'",
        "SELECT * FROM users WHERE user_id = 'u1' AND name = 'x'",
        "SELECT * FROM users WHERE user_id = 'u1' OR user_id = 'u2'",
        "SELECT * FROM users",
        "UPDATE users SET name = 'x'",
        "DELETE FROM users",
    ],
)
def test_unsupported_predicates(text):
    with pytest.raises(UnsupportedPredicateError):
        parse(text)


def test_where_on_non_key_column_with_known_schema():
    with pytest.raises(UnsupportedPredicateError):
        parse("SELECT * FROM users WHERE name = 'Ann'", {"users": "user_id"})
    # unknown tables are left to the schema check
    assert parse("SELECT * FROM other WHERE name = 'Ann'", {"users": "user_id"}).key_column == "name"


def test_non_key_predicate_needs_a_catalog():
    assert parse("SELECT * FROM t WHERE v = '1'").key_column == "v"
    with pytest.raises(UnsupportedPredicateError):
        parse("SELECT * FROM t WHERE v = '1'", {"t": "k"})


def test_parse_rejects_non_text():
    with pytest.raises(QueryParseError):
        parse(b"SELECT")


def test_tokenize_positions():
    tokens = tokenize("SELECT a")
    assert [(t.kind, t.value, t.pos) for t in tokens] == [("ident", "SELECT", 0), ("ident", "a", 7), ("end", "", 8)]


# ========== catalog ==========

def test_catalog_register_is_idempotent_and_rejects_conflicts():
    catalog = SchemaCatalog()
    assert catalog.register(USERS)
    assert not catalog.register(SchemaDef("users", "user_id", ("name", "email")))
    with pytest.raises(SchemaError):
        catalog.register(SchemaDef("users", "user_id", ("name",)))
    assert catalog.key_columns() == {"users": "user_id"}
    assert len(catalog) == 1
    with pytest.raises(SchemaError):
        catalog.get("nope")


@pytest.mark.parametrize(
    "table, key, values",
    [("1users", "k", ()), ("users", "k-1", ()), ("users", "k", ("k",)), ("users", "k", ("a", "a"))],
)
def test_schema_def_validation(table, key, values):
    with pytest.raises(SchemaError):
        SchemaDef(table, key, values)


# ========== translator ==========

def test_translate_insert(keys):
    ast = parse("INSERT INTO users (user_id, name, email) VALUES ('u1', 'Ann', 'a@x')")
    cmd = translate(ast, USERS, keys)
    names = column_pseudonyms(USERS, keys)
    assert cmd.table_pseudonym == table_pseudonym("users", keys)
    assert cmd.key_ct == det_encrypt(keys, b"u1")
    assert [name for name, _ in cmd.cells] == [names["name"], names["email"]]
    assert all(ct.scheme is Scheme.RND for _, ct in cmd.cells)
    assert rnd_decrypt(keys, cmd.cells[0][1]) == b"Ann"


def test_translate_select_projection(keys):
    names = column_pseudonyms(USERS, keys)
    cmd = translate(parse("SELECT * FROM users WHERE user_id = 'u1'"), USERS, keys)
    assert cmd.projection_pseudonyms == tuple(names[c] for c in USERS.columns)
    cmd = translate(parse("SELECT email FROM users WHERE user_id = 'u1'"), USERS, keys)
    assert cmd.projection_pseudonyms == (names["email"],)


def test_translate_create_lists_every_column(keys):
    cmd = translate(parse("CREATE TABLE users (user_id, name, email)"), USERS, keys)
    assert cmd.op is QueryOp.CREATE_TABLE
    assert len(cmd.projection_pseudonyms) == 3
    assert cmd.key_ct is None


@pytest.mark.parametrize(
    "text, error",
    [
        ("INSERT INTO users (user_id, phone) VALUES ('u1', 'x')", SchemaError),
        ("INSERT INTO users (name, user_id) VALUES ('x', 'u1')", SchemaError),
        ("UPDATE users SET user_id = 'u2' WHERE user_id = 'u1'", SchemaError),
        ("SELECT phone FROM users WHERE user_id = 'u1'", SchemaError),
        ("SELECT * FROM users WHERE name = 'x'", UnsupportedPredicateError),
        ("SELECT * FROM accounts WHERE id = 'x'", SchemaError),
    ],
)
def test_translate_schema_errors(keys, text, error):
    with pytest.raises(error):
        translate(parse(text), USERS, keys)


def test_decrypt_row_restores_names(keys):
    cmd = translate(parse("INSERT INTO users (user_id, name, email) VALUES ('u1', 'Ann', 'a@x')"), USERS, keys)
    assert decrypt_row(cmd.cells, USERS, keys) == [("name", "Ann"), ("email", "a@x")]
    with pytest.raises(SchemaError):
        decrypt_row([("cdeadbeef", cmd.cells[0][1])], USERS, keys)


# ========== totality ==========

VALID = [
    "CREATE TABLE t (k, a, b)",
    "INSERT INTO users (user_id, name) VALUES ('u1', 'it''s')",
    "SELECT name, email FROM users WHERE user_id = 'u1';",
    "UPDATE users SET name = 'x', email = 'y' WHERE user_id = 'u1'",
    "DELETE FROM users WHERE user_id = 'u1'",
]
ALPHABET = list("SELECTFROMWHEREINSERTVALUESUPDATESETDELETE ()',=*;<>_-0123456789abcxyz\n\t\"é")


def _parse_or_reject(text):
    try:
        parse(text, {"users": "user_id"})
    except QueryParseError as e:
        assert 0 <= e.offset <= len(text.encode("utf-8"))


def test_random_bytes_never_crash_the_parser():
    rng = np.random.default_rng(2024)
    lengths = list(rng.integers(0, 256, size=300)) + [4096, 65536, 65536]
    for length in lengths:
        raw = rng.integers(0, 256, size=int(length), dtype=np.uint8).tobytes()
        _parse_or_reject(raw.decode("utf-8", "replace"))
        _parse_or_reject(raw.decode("latin-1"))


def test_mutated_statements_never_crash_the_parser():
    rng = np.random.default_rng(7)
    for _ in range(3000):
        chars = list(VALID[rng.integers(len(VALID))])
        for _ in range(rng.integers(1, 6)):
            position = int(rng.integers(len(chars) + 1))
            action = rng.integers(3)
            if action == 0 and chars:
                del chars[min(position, len(chars) - 1)]
            elif action == 1:
                chars.insert(position, ALPHABET[rng.integers(len(ALPHABET))])
            elif chars:
                chars[min(position, len(chars) - 1)] = ALPHABET[rng.integers(len(ALPHABET))]
        _parse_or_reject("".join(chars))

"""
Parser for the CQL-like statement subset.

Recognized shapes (keywords case-insensitive, optional trailing ';'):

    CREATE TABLE t (k, v1, v2, ...)
    INSERT INTO t (k, c1, ...) VALUES ('kv', 'v1', ...)
    SELECT c1, ... | * FROM t WHERE k = 'kv'
    UPDATE t SET c1 = 'v1', ... WHERE k = 'kv'
    DELETE FROM t WHERE k = 'kv'

String literals are single-quoted with '' as the escape for a quote.
The only predicate is equality on the partition key.
"""

import re
from dataclasses import dataclass
from typing import List, Mapping, Optional

from ..core import QueryAst, QueryOp, QueryParseError, UnsupportedPredicateError

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
    |(?P<string>'(?:[^']|'')*')
    |(?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    |(?P<op><=|>=|!=|<>|[=<>(),;*])
    """,
    re.VERBOSE,
)

_COMPARISON_OPS = {"<", ">", "<=", ">=", "!=", "<>"}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "string" | "op" | "end"
    value: str
    pos: int  # character index into the source


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8", "surrogatepass"))


def tokenize(text: str) -> List[Token]:
    """
    Split a statement into tokens, dropping whitespace.

    Args:
        text: Statement text.

    Returns:
        Tokens in source order; quoted literals are unescaped.

    Raises:
        QueryParseError: Unterminated literal or a character no token starts with.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            if text[pos] == "'":
                raise QueryParseError("Unterminated string literal", _byte_offset(text, pos))
            raise QueryParseError(f"Unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = match.lastgroup
        if kind == "string":
            tokens.append(Token("string", match.group()[1:-1].replace("''", "'"), pos))
        elif kind != "ws":
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, text: str, key_columns: Optional[Mapping[str, str]]):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0
        self.key_columns = key_columns

    # ----- token helpers -----

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _error(self, message: str, token: Optional[Token] = None) -> QueryParseError:
        token = token or self.current
        return QueryParseError(message, _byte_offset(self.text, token.pos))

    def _advance(self) -> Token:
        token = self.current
        if token.kind != "end":
            self.index += 1
        return token

    def _is_keyword(self, word: str) -> bool:
        return self.current.kind == "ident" and self.current.value.upper() == word

    def _expect_keyword(self, word: str) -> None:
        if not self._is_keyword(word):
            raise self._error(f"Expected {word}")
        self._advance()

    def _expect_op(self, op: str) -> None:
        if self.current.kind != "op" or self.current.value != op:
            raise self._error(f"Expected '{op}'")
        self._advance()

    def _accept_op(self, op: str) -> bool:
        if self.current.kind == "op" and self.current.value == op:
            self._advance()
            return True
        return False

    def _identifier(self, what: str) -> str:
        if self.current.kind != "ident":
            raise self._error(f"Expected {what}")
        return self._advance().value

    def _literal(self) -> str:
        if self.current.kind != "string":
            raise self._error("Expected string literal")
        return self._advance().value

    def _identifier_list(self, what: str) -> List[str]:
        names = [self._identifier(what)]
        while self._accept_op(","):
            names.append(self._identifier(what))
        return names

    def _finish(self) -> None:
        self._accept_op(";")
        if self.current.kind != "end":
            raise self._error("Unexpected trailing input")

    # ----- statements -----

    def parse(self) -> QueryAst:
        if self.current.kind == "end":
            raise self._error("Empty query")
        head = self.current.value.upper() if self.current.kind == "ident" else ""
        handlers = {
            "CREATE": self._create,
            "INSERT": self._insert,
            "SELECT": self._select,
            "UPDATE": self._update,
            "DELETE": self._delete,
        }
        handler = handlers.get(head)
        if handler is None:
            raise self._error("Expected CREATE, INSERT, SELECT, UPDATE or DELETE")
        self._advance()
        ast = handler()
        self._finish()
        return ast

    def _create(self) -> QueryAst:
        self._expect_keyword("TABLE")
        table = self._identifier("table name")
        self._expect_op("(")
        columns = self._identifier_list("column name")
        self._expect_op(")")
        if len(set(columns)) != len(columns):
            raise self._error("Duplicate column in CREATE TABLE")
        return QueryAst(op=QueryOp.CREATE_TABLE, table=table, key_column=columns[0], columns=tuple(columns))

    def _insert(self) -> QueryAst:
        self._expect_keyword("INTO")
        table = self._identifier("table name")
        self._expect_op("(")
        col_token = self.current
        columns = self._identifier_list("column name")
        self._expect_op(")")
        self._expect_keyword("VALUES")
        self._expect_op("(")
        values = [self._literal()]
        while self._accept_op(","):
            values.append(self._literal())
        self._expect_op(")")
        if len(columns) != len(values):
            raise self._error(f"{len(columns)} columns but {len(values)} values", col_token)
        if len(set(columns)) != len(columns):
            raise self._error("Duplicate column in INSERT", col_token)
        return QueryAst(
            op=QueryOp.INSERT,
            table=table,
            key_column=columns[0],
            key_value=values[0],
            assignments=tuple(zip(columns[1:], values[1:])),
        )

    def _select(self) -> QueryAst:
        if self._accept_op("*"):
            projection = ["*"]
        else:
            projection = self._identifier_list("column name or *")
        self._expect_keyword("FROM")
        table = self._identifier("table name")
        key_column, key_value = self._where(table)
        return QueryAst(
            op=QueryOp.SELECT,
            table=table,
            key_column=key_column,
            key_value=key_value,
            projection=tuple(projection),
        )

    def _update(self) -> QueryAst:
        table = self._identifier("table name")
        self._expect_keyword("SET")
        assignments = [self._assignment()]
        while self._accept_op(","):
            assignments.append(self._assignment())
        names = [a[0] for a in assignments]
        if len(set(names)) != len(names):
            raise self._error("Duplicate column in SET")
        key_column, key_value = self._where(table)
        return QueryAst(
            op=QueryOp.UPDATE,
            table=table,
            key_column=key_column,
            key_value=key_value,
            assignments=tuple(assignments),
        )

    def _delete(self) -> QueryAst:
        self._expect_keyword("FROM")
        table = self._identifier("table name")
        key_column, key_value = self._where(table)
        return QueryAst(op=QueryOp.DELETE, table=table, key_column=key_column, key_value=key_value)

    def _assignment(self) -> tuple[str, str]:
        column = self._identifier("column name")
        self._expect_op("=")
        return column, self._literal()

    def _where(self, table: str) -> tuple[str, str]:
        if not self._is_keyword("WHERE"):
            raise UnsupportedPredicateError(
                "Statement must restrict the partition key with WHERE",
                _byte_offset(self.text, self.current.pos),
            )
        self._advance()
        col_token = self.current
        column = self._identifier("column name")
        if self.current.kind == "op" and self.current.value in _COMPARISON_OPS:
            raise UnsupportedPredicateError(
                f"Only equality on the partition key is supported, got '{self.current.value}'",
                _byte_offset(self.text, self.current.pos),
            )
        self._expect_op("=")
        value = self._literal()
        if self._is_keyword("AND") or self._is_keyword("OR"):
            raise UnsupportedPredicateError(
                "Compound predicates are not supported",
                _byte_offset(self.text, self.current.pos),
            )
        if self.key_columns is not None:
            key = self.key_columns.get(table)
            if key is not None and column != key:
                raise UnsupportedPredicateError(
                    f"WHERE column '{column}' is not the partition key of '{table}'",
                    _byte_offset(self.text, col_token.pos),
                )
        return column, value


def parse(text: str, key_columns: Optional[Mapping[str, str]] = None) -> QueryAst:
    """
    Parse one statement into a QueryAst.

    Range operators, AND/OR and a missing WHERE are always rejected. Whether
    an equality WHERE names the partition key depends on the schema, so that
    check only runs when a catalog mapping is passed; without one,
    `SELECT * FROM t WHERE v = '1'` parses. The proxy always passes its catalog.

    Args:
        text: Statement text, optionally ending in ';'.
        key_columns: Table name -> partition key column, usually
            `SchemaCatalog.key_columns()`.

    Returns:
        The statement's QueryAst.

    Raises:
        QueryParseError: On any malformed input, with the byte offset of the
            offending token. UnsupportedPredicateError for WHERE clauses
            other than key equality.
    """
    if not isinstance(text, str):
        raise QueryParseError("Query must be text", 0)
    try:
        return _Parser(text, key_columns).parse()
    except QueryParseError:
        raise
    except Exception as e:  # parser bug must not take the session down
        raise QueryParseError(f"Unparseable query: {type(e).__name__}", 0) from e

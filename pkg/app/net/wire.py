"""
Bit-exact wire codec shared by proxies and storage nodes.

Frame   = u32 big-endian payload length || payload
Payload = u8 opcode || body

Client <-> proxy:
    0x01 CREATE_SCHEMA  u16 table-len || table || u8 count || (u16 len || name)*
    0x02 QUERY          u32 len || UTF-8 query text
    0x81 OK             (empty)
    0x82 ROWS           u16 count || (u16 name-len || name || u32 value-len || value)*
    0x83 ERROR          u8 code || u16 msg-len || msg

Client <-> node (NoEnc): CREATE_SCHEMA and 0x03 PLAIN_QUERY (same body as QUERY).

Proxy/node <-> node, raw rows (table = u16 len || bytes, key = u32 len || bytes,
cells as in ROWS):
    0x11 ROW_GET / 0x21 REPLICA_GET          table || key
    0x12 ROW_PUT / 0x22 REPLICA_PUT          table || key || u8 merge || cells
    0x13 ROW_DELETE / 0x23 REPLICA_DELETE    table || key
    0x14 TABLE_CREATE / 0x24 REPLICA_CREATE  same body as CREATE_SCHEMA
0x1x opcodes are routed by the receiving node as coordinator, 0x2x are
applied to the receiving node only.
"""

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple, Union

from ..core import ErrorCode, ProtocolError, QueryResult

MAX_FRAME_BYTES = 16 * 1024 * 1024

_U8 = struct.Struct(">B")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")

Name = Union[str, bytes]


class Opcode(IntEnum):
    CREATE_SCHEMA = 0x01
    QUERY = 0x02
    PLAIN_QUERY = 0x03
    ROW_GET = 0x11
    ROW_PUT = 0x12
    ROW_DELETE = 0x13
    TABLE_CREATE = 0x14
    REPLICA_GET = 0x21
    REPLICA_PUT = 0x22
    REPLICA_DELETE = 0x23
    REPLICA_CREATE = 0x24
    OK = 0x81
    ROWS = 0x82
    ERROR = 0x83


def _as_bytes(value: Name) -> bytes:
    return value.encode("utf-8") if isinstance(value, str) else bytes(value)


def frame(payload: bytes) -> bytes:
    """Prefix a payload with its u32 big-endian length."""
    return _U32.pack(len(payload)) + payload


def frame_length(header: bytes) -> int:
    return _U32.unpack(header)[0]


class Reader:
    """Cursor over a body; every underflow is a ProtocolError."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise ProtocolError(f"Truncated body: need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self._take(1))[0]

    def u16(self) -> int:
        return _U16.unpack(self._take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def short_bytes(self) -> bytes:
        return self._take(self.u16())

    def long_bytes(self) -> bytes:
        return self._take(self.u32())

    def short_text(self) -> str:
        raw = self.short_bytes()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("Name is not valid UTF-8") from None

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.pos} trailing bytes in body")


def split_payload(payload: bytes) -> Tuple[Opcode, bytes]:
    if not payload:
        raise ProtocolError("Empty payload")
    try:
        opcode = Opcode(payload[0])
    except ValueError:
        raise ProtocolError(f"Unknown opcode 0x{payload[0]:02x}") from None
    return opcode, payload[1:]


# ========== schema ==========

def encode_create_schema(table: str, columns: Sequence[str], opcode: Opcode = Opcode.CREATE_SCHEMA) -> bytes:
    if not 0 < len(columns) < 256:
        raise ValueError("A schema needs between 1 and 255 columns")
    parts = [_U8.pack(opcode), _short(table), _U8.pack(len(columns))]
    parts.extend(_short(c) for c in columns)
    return b"".join(parts)


def decode_create_schema(body: bytes) -> Tuple[str, List[str]]:
    reader = Reader(body)
    table = reader.short_text()
    count = reader.u8()
    columns = [reader.short_text() for _ in range(count)]
    reader.done()
    if not columns:
        raise ProtocolError("Schema has no columns")
    return table, columns


# ========== query ==========

def encode_query(text: str, opcode: Opcode = Opcode.QUERY) -> bytes:
    raw = text.encode("utf-8")
    return _U8.pack(opcode) + _U32.pack(len(raw)) + raw


def decode_query(body: bytes) -> str:
    reader = Reader(body)
    raw = reader.long_bytes()
    reader.done()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ProtocolError("Query text is not valid UTF-8") from None


# ========== responses ==========

def encode_ok() -> bytes:
    return _U8.pack(Opcode.OK)


def encode_rows(cells: Sequence[Tuple[Name, Name]]) -> bytes:
    return _U8.pack(Opcode.ROWS) + _cells(cells)


def decode_rows(body: bytes) -> List[Tuple[bytes, bytes]]:
    reader = Reader(body)
    cells = _read_cells(reader)
    reader.done()
    return cells


def encode_error(code: ErrorCode, message: str) -> bytes:
    raw = message.encode("utf-8")[:0xFFFF]
    # truncation may split a multi-byte character
    raw = raw.decode("utf-8", "ignore").encode("utf-8")
    return _U8.pack(Opcode.ERROR) + _U8.pack(int(code)) + _U16.pack(len(raw)) + raw


def decode_error(body: bytes) -> Tuple[int, str]:
    reader = Reader(body)
    code = reader.u8()
    message = reader.short_bytes().decode("utf-8", "replace")
    reader.done()
    return code, message


def decode_response(payload: bytes) -> QueryResult:
    """Client-side view of an OK / ROWS / ERROR payload."""
    opcode, body = split_payload(payload)
    if opcode is Opcode.OK:
        Reader(body).done()
        return QueryResult()
    if opcode is Opcode.ROWS:
        cells = tuple(
            (name.decode("utf-8", "replace"), value.decode("utf-8", "replace"))
            for name, value in decode_rows(body)
        )
        return QueryResult(cells=cells, rows=True)
    if opcode is Opcode.ERROR:
        code, message = decode_error(body)
        try:
            return QueryResult(error_code=ErrorCode(code), message=message)
        except ValueError:
            raise ProtocolError(f"Unknown error code {code}") from None
    raise ProtocolError(f"Opcode {opcode.name} is not a response")


def encode_result(result: QueryResult) -> bytes:
    """Inverse of decode_response for plaintext results."""
    if result.error_code is not None:
        return encode_error(result.error_code, result.message)
    if result.rows or result.cells:
        return encode_rows(result.cells)
    return encode_ok()


# ========== raw rows ==========

@dataclass(frozen=True)
class RowRequest:
    opcode: Opcode
    table: str
    key: bytes
    cells: Optional[List[Tuple[bytes, bytes]]] = None
    merge: bool = False


def encode_row_get(table: str, key: bytes, opcode: Opcode = Opcode.ROW_GET) -> bytes:
    return _U8.pack(opcode) + _short(table) + _long(key)


def encode_row_delete(table: str, key: bytes, opcode: Opcode = Opcode.ROW_DELETE) -> bytes:
    return _U8.pack(opcode) + _short(table) + _long(key)


def encode_row_put(
    table: str,
    key: bytes,
    cells: Sequence[Tuple[Name, bytes]],
    merge: bool = False,
    opcode: Opcode = Opcode.ROW_PUT,
) -> bytes:
    return _U8.pack(opcode) + _short(table) + _long(key) + _U8.pack(1 if merge else 0) + _cells(cells)


def decode_row_request(opcode: Opcode, body: bytes) -> RowRequest:
    reader = Reader(body)
    table = reader.short_text()
    key = reader.long_bytes()
    cells = None
    merge = False
    if opcode in (Opcode.ROW_PUT, Opcode.REPLICA_PUT):
        merge = reader.u8() == 1
        cells = _read_cells(reader)
    reader.done()
    if not key:
        raise ProtocolError("Row key is empty")
    return RowRequest(opcode=opcode, table=table, key=key, cells=cells, merge=merge)


# ========== helpers ==========

def _short(value: Name) -> bytes:
    raw = _as_bytes(value)
    if len(raw) > 0xFFFF:
        raise ValueError("Name longer than 65535 bytes")
    return _U16.pack(len(raw)) + raw


def _long(value: bytes) -> bytes:
    return _U32.pack(len(value)) + value


def _cells(cells: Sequence[Tuple[Name, Name]]) -> bytes:
    if len(cells) > 0xFFFF:
        raise ValueError("Too many cells")
    parts = [_U16.pack(len(cells))]
    for name, value in cells:
        parts.append(_short(name))
        parts.append(_long(_as_bytes(value)))
    return b"".join(parts)


def _read_cells(reader: Reader) -> List[Tuple[bytes, bytes]]:
    count = reader.u16()
    return [(reader.short_bytes(), reader.long_bytes()) for _ in range(count)]

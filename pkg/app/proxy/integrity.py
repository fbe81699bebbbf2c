"""
Row integrity: canonical row serialization and the proxy's tag ledger.

The ledger maps (table pseudonym, row key ciphertext) to the HMAC of the
row as last written through this proxy. It can persist to an append-only
file that is replayed on start.
"""

import logging
import os
import struct
import threading
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from ..core import TAG_BYTES, HmacTag

logger = logging.getLogger(__name__)

_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")

OP_PUT = 1
OP_DELETE = 2


def canonical_serialize(table_pseudonym: str, key_ct: bytes, cells: Iterable[Tuple[str, bytes]]) -> bytes:
    """
    table ‖ 0x00 ‖ u32 len(key) ‖ key ‖ per cell in ascending name order:
    u16 len(name) ‖ name ‖ u32 len(ct) ‖ ct
    """
    parts = [table_pseudonym.encode("utf-8"), b"\x00", _U32.pack(len(key_ct)), key_ct]
    for name, ct in sorted((n.encode("utf-8"), bytes(c)) for n, c in cells):
        parts.append(_U16.pack(len(name)))
        parts.append(name)
        parts.append(_U32.pack(len(ct)))
        parts.append(ct)
    return b"".join(parts)


LedgerKey = Tuple[str, bytes]


class IntegrityLedger:
    """Thread-safe (table, key) -> HmacTag map, optionally file-backed."""

    def __init__(self, path: Optional[Path] = None):
        self._lock = threading.Lock()
        self._entries: Dict[LedgerKey, HmacTag] = {}
        self.path = Path(path) if path else None
        self._file = None
        if self.path is not None:
            self._replay()
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, "ab")

    # ----- map -----

    def get(self, table: str, key: bytes) -> Optional[HmacTag]:
        with self._lock:
            return self._entries.get((table, key))

    def put(self, table: str, key: bytes, tag: HmacTag) -> None:
        with self._lock:
            self._entries[(table, key)] = tag
            self._append(OP_PUT, table, key, tag.data)

    def remove(self, table: str, key: bytes) -> bool:
        with self._lock:
            existed = self._entries.pop((table, key), None) is not None
            if existed:
                self._append(OP_DELETE, table, key, b"")
            return existed

    def __contains__(self, item: LedgerKey) -> bool:
        with self._lock:
            return item in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None

    # ----- persistence -----

    def _append(self, op: int, table: str, key: bytes, tag: bytes) -> None:
        if self._file is None:
            return
        raw_table = table.encode("utf-8")
        self._file.write(bytes([op]) + _U16.pack(len(raw_table)) + raw_table + _U32.pack(len(key)) + key + tag)
        self._file.flush()

    def _replay(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        pos = 0
        records = 0
        while pos < len(data):
            record = _parse_record(data, pos)
            if record is None:
                logger.warning(
                    f"[PROXY] Ledger {self.path.name} has a torn tail of {len(data) - pos} bytes; truncating"
                )
                with open(self.path, "r+b") as f:
                    f.truncate(pos)
                    f.flush()
                    os.fsync(f.fileno())
                break
            op, table, key, tag, pos = record
            if op == OP_PUT:
                self._entries[(table, key)] = HmacTag(tag)
            else:
                self._entries.pop((table, key), None)
            records += 1
        logger.info(f"[PROXY] Ledger replayed {records} records, {len(self._entries)} live entries")


def _parse_record(data: bytes, pos: int) -> Optional[Tuple[int, str, bytes, bytes, int]]:
    """Decode one record at `pos`; None when the record is incomplete or invalid."""
    try:
        op = data[pos]
        if op not in (OP_PUT, OP_DELETE):
            return None
        pos += 1
        (table_len,) = _U16.unpack_from(data, pos)
        pos += 2
        table = data[pos:pos + table_len].decode("utf-8")
        pos += table_len
        (key_len,) = _U32.unpack_from(data, pos)
        pos += 4
        key = data[pos:pos + key_len]
        pos += key_len
        tag = b""
        if op == OP_PUT:
            tag = data[pos:pos + TAG_BYTES]
            pos += TAG_BYTES
        if pos > len(data) or len(key) != key_len:
            return None
        return op, table, key, tag, pos
    except (IndexError, struct.error, UnicodeDecodeError):
        return None

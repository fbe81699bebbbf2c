"""Canonical row serialization and the tag ledger's file persistence."""

import logging
import struct

from app.core import HmacTag
from app.proxy import IntegrityLedger, canonical_serialize

TAG_A = HmacTag(b"\xaa" * 32)
TAG_B = HmacTag(b"\xbb" * 32)


def test_canonical_layout():
    raw = canonical_serialize("t1", b"\x01\x02", [("cb", b"\x09"), ("ca", b"")])
    expected = (
        b"t1\x00" + struct.pack(">I", 2) + b"\x01\x02"
        + struct.pack(">H", 2) + b"ca" + struct.pack(">I", 0)
        + struct.pack(">H", 2) + b"cb" + struct.pack(">I", 1) + b"\x09"
    )
    assert raw == expected


def test_canonical_is_order_independent_and_injective():
    a = canonical_serialize("t", b"k", [("x", b"1"), ("y", b"2")])
    assert a == canonical_serialize("t", b"k", [("y", b"2"), ("x", b"1")])
    assert a != canonical_serialize("t", b"k", [("x", b"12")])
    assert a != canonical_serialize("t", b"k2", [("x", b"1"), ("y", b"2")])
    assert canonical_serialize("t", b"k", [("x", b"1y")]) != canonical_serialize("t", b"k", [("x", b"1"), ("y", b"")])


def test_in_memory_ledger():
    ledger = IntegrityLedger()
    ledger.put("t", b"k", TAG_A)
    assert ledger.get("t", b"k") == TAG_A
    assert ("t", b"k") in ledger and len(ledger) == 1
    assert ledger.remove("t", b"k")
    assert not ledger.remove("t", b"k")
    assert ledger.get("t", b"k") is None


def test_file_ledger_replays(tmp_path):
    path = tmp_path / "ledger" / "proxy-0.ledger"
    ledger = IntegrityLedger(path)
    ledger.put("t", b"k1", TAG_A)
    ledger.put("t", b"k2", TAG_A)
    ledger.put("t", b"k1", TAG_B)
    ledger.remove("t", b"k2")
    ledger.close()

    replayed = IntegrityLedger(path)
    assert replayed.get("t", b"k1") == TAG_B
    assert replayed.get("t", b"k2") is None
    assert len(replayed) == 1
    replayed.close()


def test_torn_tail_is_truncated_with_warning(tmp_path, caplog):
    path = tmp_path / "proxy-0.ledger"
    ledger = IntegrityLedger(path)
    ledger.put("t", b"k1", TAG_A)
    ledger.close()
    intact = path.stat().st_size
    with open(path, "ab") as f:
        f.write(b"\x01\x00\x01t\x00\x00\x00\x02k2" + b"\xbb" * 10)

    caplog.set_level(logging.WARNING)
    replayed = IntegrityLedger(path)
    assert "torn tail" in caplog.text
    assert replayed.get("t", b"k1") == TAG_A
    assert replayed.get("t", b"k2") is None
    assert path.stat().st_size == intact

    # appends after recovery land on a clean record boundary
    replayed.put("t", b"k3", TAG_B)
    replayed.close()
    again = IntegrityLedger(path)
    assert again.get("t", b"k3") == TAG_B and len(again) == 2
    again.close()


def test_garbage_op_byte_stops_replay(tmp_path):
    path = tmp_path / "proxy-0.ledger"
    path.write_bytes(b"\x07garbage")
    ledger = IntegrityLedger(path)
    assert len(ledger) == 0
    assert path.stat().st_size == 0
    ledger.close()

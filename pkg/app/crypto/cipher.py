"""
RND / DET encryption, key derivation, record HMAC and name anonymization.

RND and DET are both AES-128-CBC with PKCS#7 padding. RND prefixes a
fresh random IV; DET uses a fixed all-zero IV so equal plaintexts map to
equal ciphertexts (weaker than a synthetic-IV construction, but it is
what equality lookup on the partition key needs).
"""

import logging
import os
from typing import Optional, Union

from cryptography.hazmat.primitives import constant_time, hashes, hmac, padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..core import (
    AES_KEY_BYTES,
    BLOCK_BYTES,
    MASTER_KEY_BYTES,
    Ciphertext,
    DecryptionError,
    HmacTag,
    KeyDerivationError,
    KeySet,
    MasterKey,
    NameKind,
    Scheme,
)

logger = logging.getLogger(__name__)

DET_IV = bytes(BLOCK_BYTES)
PSEUDONYM_DIGEST_BYTES = 16

# Key derivation labels
LABEL_DET = b"det"
LABEL_RND = b"rnd"
LABEL_MAC = b"mac"
LABEL_META = b"meta"


def _hmac_sha256(key: bytes, data: bytes) -> bytes:
    h = hmac.HMAC(key, hashes.SHA256())
    h.update(data)
    return h.finalize()


def derive_keys(master: Union[MasterKey, bytes]) -> KeySet:
    """Derive the DET, RND, MAC and metadata keys from one master secret."""
    if isinstance(master, MasterKey):
        secret = master.secret
    else:
        if not isinstance(master, (bytes, bytearray)) or len(master) != MASTER_KEY_BYTES:
            raise KeyDerivationError(f"Master key must be exactly {MASTER_KEY_BYTES} bytes")
        secret = bytes(master)

    return KeySet(
        det_key=_hmac_sha256(secret, LABEL_DET)[:AES_KEY_BYTES],
        rnd_key=_hmac_sha256(secret, LABEL_RND)[:AES_KEY_BYTES],
        mac_key=_hmac_sha256(secret, LABEL_MAC),
        meta_key=_hmac_sha256(secret, LABEL_META),
    )


# ========== AES-CBC helpers ==========

def _cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    padder = padding.PKCS7(BLOCK_BYTES * 8).padder()
    padded = padder.update(plaintext) + padder.finalize()
    encryptor = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return encryptor.update(padded) + encryptor.finalize()


def _cbc_decrypt(key: bytes, iv: bytes, body: bytes) -> bytes:
    if not body or len(body) % BLOCK_BYTES:
        raise DecryptionError(f"Ciphertext body length {len(body)} is not a positive multiple of {BLOCK_BYTES}")
    decryptor = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    padded = decryptor.update(body) + decryptor.finalize()
    unpadder = padding.PKCS7(BLOCK_BYTES * 8).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError:
        raise DecryptionError("Invalid padding") from None


# ========== RND ==========

def rnd_encrypt(keys: KeySet, plaintext: bytes, iv: Optional[bytes] = None) -> Ciphertext:
    """
    Randomized encryption: IV || AES-128-CBC(rnd_key, IV, pad(plaintext)).

    `iv` is only for reproducible tests; production callers leave it None.
    """
    if iv is None:
        iv = os.urandom(BLOCK_BYTES)
    elif len(iv) != BLOCK_BYTES:
        raise ValueError(f"IV must be {BLOCK_BYTES} bytes")
    return Ciphertext(Scheme.RND, iv + _cbc_encrypt(keys.rnd_key, iv, plaintext))


def rnd_decrypt(keys: KeySet, ct: Ciphertext) -> bytes:
    """
    Invert rnd_encrypt using the IV carried in the first block.

    Args:
        keys: Key set holding rnd_key.
        ct: RND ciphertext, IV followed by at least one block.

    Returns:
        The unpadded plaintext.

    Raises:
        DecryptionError: Wrong scheme, bad length or invalid padding.
    """
    if ct.scheme is not Scheme.RND:
        raise DecryptionError(f"Expected RND ciphertext, got {ct.scheme.name}")
    if len(ct.data) < 2 * BLOCK_BYTES:
        raise DecryptionError(f"RND ciphertext too short ({len(ct.data)} bytes)")
    return _cbc_decrypt(keys.rnd_key, ct.data[:BLOCK_BYTES], ct.data[BLOCK_BYTES:])


# ========== DET ==========

def det_encrypt(keys: KeySet, plaintext: bytes) -> Ciphertext:
    """Deterministic encryption: AES-128-CBC(det_key, 0^16, pad(plaintext))."""
    return Ciphertext(Scheme.DET, _cbc_encrypt(keys.det_key, DET_IV, plaintext))


def det_decrypt(keys: KeySet, ct: Ciphertext) -> bytes:
    """Invert det_encrypt; raises DecryptionError on a wrong scheme or bad padding."""
    if ct.scheme is not Scheme.DET:
        raise DecryptionError(f"Expected DET ciphertext, got {ct.scheme.name}")
    return _cbc_decrypt(keys.det_key, DET_IV, ct.data)


# ========== integrity ==========

def record_hmac(keys: KeySet, canonical: bytes) -> HmacTag:
    """HMAC-SHA256 over a canonical row serialization."""
    return HmacTag(_hmac_sha256(keys.mac_key, canonical))


def verify_hmac(keys: KeySet, canonical: bytes, tag: HmacTag) -> bool:
    """Constant-time comparison of a recomputed tag against a stored one."""
    return constant_time.bytes_eq(record_hmac(keys, canonical).data, tag.data)


# ========== metadata ==========

def anonymize_name(keys: KeySet, kind: NameKind, name: str) -> str:
    """Deterministic identifier-safe pseudonym: 't'|'c' + 32 hex chars."""
    if not name:
        raise ValueError("Cannot anonymize an empty name")
    digest = _hmac_sha256(keys.meta_key, kind.kind_byte + name.encode("utf-8"))
    return kind.prefix + digest[:PSEUDONYM_DIGEST_BYTES].hex()


def rnd_length(plaintext_length: int) -> int:
    """Expected RND ciphertext length for a plaintext of the given size."""
    return BLOCK_BYTES + det_length(plaintext_length)


def det_length(plaintext_length: int) -> int:
    """
    DET ciphertext length after PKCS#7 padding.

    Args:
        plaintext_length: Plaintext size in bytes.

    Returns:
        The next multiple of 16 strictly above plaintext_length.
    """
    return BLOCK_BYTES * ((plaintext_length + 1 + BLOCK_BYTES - 1) // BLOCK_BYTES)


class CipherSuite:
    """A KeySet bundled with the scheme operations the proxy needs."""

    def __init__(self, keys: KeySet):
        self.keys = keys

    @classmethod
    def from_master(cls, master: Union[MasterKey, bytes]) -> "CipherSuite":
        return cls(derive_keys(master))

    def rnd(self, plaintext: bytes) -> Ciphertext:
        return rnd_encrypt(self.keys, plaintext)

    def det(self, plaintext: bytes) -> Ciphertext:
        return det_encrypt(self.keys, plaintext)

    def decrypt(self, ct: Ciphertext) -> bytes:
        if ct.scheme is Scheme.RND:
            return rnd_decrypt(self.keys, ct)
        return det_decrypt(self.keys, ct)

    def tag(self, canonical: bytes) -> HmacTag:
        return record_hmac(self.keys, canonical)

    def verify(self, canonical: bytes, tag: HmacTag) -> bool:
        return verify_hmac(self.keys, canonical, tag)

    def table(self, name: str) -> str:
        return anonymize_name(self.keys, NameKind.TABLE, name)

    def column(self, name: str) -> str:
        return anonymize_name(self.keys, NameKind.COLUMN, name)

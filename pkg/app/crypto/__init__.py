"""Encryption schemes, key derivation and integrity tags."""
from .cipher import (
    CipherSuite,
    anonymize_name,
    derive_keys,
    det_decrypt,
    det_encrypt,
    det_length,
    record_hmac,
    rnd_decrypt,
    rnd_encrypt,
    rnd_length,
    verify_hmac,
)

__all__ = [
    "CipherSuite",
    "anonymize_name",
    "derive_keys",
    "det_decrypt",
    "det_encrypt",
    "det_length",
    "record_hmac",
    "rnd_decrypt",
    "rnd_encrypt",
    "rnd_length",
    "verify_hmac",
]

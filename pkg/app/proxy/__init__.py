"""Secure proxy tier: encryption, integrity ledger, servers and client sessions."""
from .integrity import IntegrityLedger, canonical_serialize
from .engine import SecureProxy
from .server import ProxyServer, remote_proxy, serve_proxy
from .client import LocalSession, Session, TcpSession

__all__ = [
    "IntegrityLedger",
    "canonical_serialize",
    "SecureProxy",
    "ProxyServer",
    "remote_proxy",
    "serve_proxy",
    "LocalSession",
    "Session",
    "TcpSession",
]

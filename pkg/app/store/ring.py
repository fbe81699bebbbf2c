"""
Token ring placement.

Row keys (DET ciphertexts) are hashed to a 64-bit ring position with
FNV-1a. The primary replica is the first node whose token is >= the
position, wrapping past the highest token; the remaining replicas are its
ring successors.
"""

from bisect import bisect_left
from typing import List

from ..core import ClusterRing, Consistency, NodeId, RingEntry

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
RING_SIZE = 1 << 64
_MASK = RING_SIZE - 1


def ring_position(key: bytes) -> int:
    """FNV-1a 64-bit hash of a row key."""
    h = FNV_OFFSET_BASIS
    for byte in key:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK
    return h


def build_ring(node_count: int, replication_factor: int = 4) -> ClusterRing:
    """Evenly spaced tokens: node i sits in the middle of the i-th arc."""
    if node_count < 1:
        raise ValueError("A ring needs at least one node")
    if not 1 <= replication_factor <= node_count:
        raise ValueError(
            f"Replication factor {replication_factor} must be between 1 and {node_count}"
        )
    entries = tuple(
        RingEntry(NodeId(i), ((2 * i + 1) * RING_SIZE) // (2 * node_count))
        for i in range(node_count)
    )
    return ClusterRing(entries=entries, replication_factor=replication_factor, consistency=Consistency.ONE)


def replicas(token: int, ring: ClusterRing) -> List[NodeId]:
    """Replica nodes of a ring position, primary first."""
    tokens = [e.token for e in ring.entries]
    start = bisect_left(tokens, token) % len(tokens)
    count = min(ring.replication_factor, len(tokens))
    return [ring.entries[(start + i) % len(tokens)].node for i in range(count)]


def replicas_for_key(key: bytes, ring: ClusterRing) -> List[NodeId]:
    """
    Replica set of a row key.

    Args:
        key: Row key bytes as stored (the DET ciphertext for encrypted models).
        ring: Token ring of the cluster.

    Returns:
        replication_factor distinct nodes, primary first.
    """
    return replicas(ring_position(key), ring)

"""
Core data types for the SEC-NoSQL toolkit.

All types use @dataclass and Enum for structured representations.
No loose dicts at the internal API boundary.
"""

import os
from dataclasses import dataclass, field
from enum import Enum, IntEnum, auto
from typing import Optional

from .errors import DecryptionError, KeyDerivationError, SchemaError


MASTER_KEY_BYTES = 32
AES_KEY_BYTES = 16  # AES-128
BLOCK_BYTES = 16
TAG_BYTES = 32  # HMAC-SHA256

# Polynomial basis order, shared by the SLA fitter and the JSON writer
COEFFICIENT_NAMES = ("c00", "c10", "c01", "c20", "c11", "c02", "c21", "c12", "c03")


class Scheme(Enum):
    """Encryption scheme of a ciphertext."""
    RND = auto()
    DET = auto()


class NameKind(Enum):
    """What kind of schema name is being anonymized."""
    TABLE = ("t", 0x01)
    COLUMN = ("c", 0x02)

    @property
    def prefix(self) -> str:
        return self.value[0]

    @property
    def kind_byte(self) -> bytes:
        return bytes([self.value[1]])


class QueryOp(Enum):
    """Statement kinds of the supported CQL subset."""
    CREATE_TABLE = auto()
    INSERT = auto()
    SELECT = auto()
    UPDATE = auto()
    DELETE = auto()

    @property
    def is_write(self) -> bool:
        return self in (QueryOp.INSERT, QueryOp.UPDATE)


class ErrorCode(IntEnum):
    """Wire error codes carried by an ERROR frame."""
    NOT_FOUND = 1
    INTEGRITY_FAILURE = 2
    PARSE = 3
    SCHEMA = 4
    BACKEND = 5


class Consistency(Enum):
    ONE = auto()


class StoreStatus(Enum):
    OK = auto()
    NOT_FOUND = auto()


class CoordinatorPolicy(Enum):
    """How a proxy picks the coordinator node for each request."""
    PINNED = "pinned"
    ROTATE = "rotate"


class ModelKind(Enum):
    """Deployment models compared by the benchmark."""
    NO_ENC = "NoEnc"
    ENC_M1 = "EncM1"
    ENC_M2 = "EncM2"
    ENC_M3 = "EncM3"

    @property
    def encrypted(self) -> bool:
        return self is not ModelKind.NO_ENC

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        for kind in cls:
            if kind.value.lower() == name.strip().lower():
                return kind
        raise ValueError(f"Unknown deployment model: {name!r}")


class RunMode(Enum):
    """Where the topology components live."""
    LOCAL = "local"              # direct in-process calls through the wire codec
    TCP = "tcp"                  # real sockets, servers on background threads
    MULTIPROCESS = "multiprocess"  # real sockets, one child process per server


class Distribution(Enum):
    ZIPFIAN = "zipfian"
    UNIFORM = "uniform"


class Metric(Enum):
    """Performance metrics modelled by an SLA surface."""
    THROUGHPUT = "throughput"
    READ_LATENCY = "read_latency"
    WRITE_LATENCY = "write_latency"


class ValidationSeverity(Enum):
    """Validation issue severity."""
    ERROR = auto()
    WARNING = auto()


# ---------------------------------------------------------------------------
# crypto
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MasterKey:
    """32-byte root secret. Never printed, never serialized."""
    secret: bytes = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.secret, (bytes, bytearray)) or len(self.secret) != MASTER_KEY_BYTES:
            raise KeyDerivationError(
                f"Master key must be exactly {MASTER_KEY_BYTES} bytes"
            )

    @classmethod
    def from_hex(cls, text: str) -> "MasterKey":
        text = text.strip()
        if len(text) != 2 * MASTER_KEY_BYTES:
            raise KeyDerivationError(
                f"Master key must be {2 * MASTER_KEY_BYTES} hex characters"
            )
        try:
            return cls(bytes.fromhex(text))
        except ValueError as e:
            raise KeyDerivationError(f"Master key is not valid hex: {e}") from None

    @classmethod
    def generate(cls) -> "MasterKey":
        return cls(os.urandom(MASTER_KEY_BYTES))

    def to_hex(self) -> str:
        return self.secret.hex()


@dataclass(frozen=True)
class KeySet:
    """The four scheme keys derived from one master key."""
    det_key: bytes = field(repr=False)
    rnd_key: bytes = field(repr=False)
    mac_key: bytes = field(repr=False)
    meta_key: bytes = field(repr=False)

    def all_keys(self) -> tuple[bytes, bytes, bytes, bytes]:
        return (self.det_key, self.rnd_key, self.mac_key, self.meta_key)


@dataclass(frozen=True)
class Ciphertext:
    """Opaque ciphertext tagged with the scheme that produced it."""
    scheme: Scheme
    data: bytes

    def is_well_formed(self) -> bool:
        n = len(self.data)
        if self.scheme is Scheme.RND:
            return n >= 2 * BLOCK_BYTES and n % BLOCK_BYTES == 0
        return n >= BLOCK_BYTES and n % BLOCK_BYTES == 0

    @classmethod
    def from_bytes(cls, scheme: Scheme, raw: bytes) -> "Ciphertext":
        """Wrap stored bytes; malformed lengths mean the store was corrupted."""
        ct = cls(scheme, bytes(raw))
        if not ct.is_well_formed():
            raise DecryptionError(f"{scheme.name} ciphertext of {len(raw)} bytes is malformed")
        return ct


@dataclass(frozen=True)
class HmacTag:
    data: bytes

    def __post_init__(self):
        if len(self.data) != TAG_BYTES:
            raise ValueError(f"HMAC tag must be {TAG_BYTES} bytes, got {len(self.data)}")


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemaDef:
    """Single-table schema: one partition key column plus value columns."""
    table: str
    key_column: str
    value_columns: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "value_columns", tuple(self.value_columns))
        names = (self.table, self.key_column, *self.value_columns)
        for name in names:
            if not is_identifier(name):
                raise SchemaError(f"Invalid identifier: {name!r}")
        if self.key_column in self.value_columns:
            raise SchemaError(f"Key column '{self.key_column}' repeated among value columns")
        if len(set(self.value_columns)) != len(self.value_columns):
            raise SchemaError(f"Duplicate value columns in table '{self.table}'")

    @property
    def columns(self) -> tuple[str, ...]:
        """Key column first, then value columns."""
        return (self.key_column, *self.value_columns)

    def has_column(self, name: str) -> bool:
        return name == self.key_column or name in self.value_columns


@dataclass(frozen=True)
class QueryAst:
    """Parsed statement of the CQL-like subset."""
    op: QueryOp
    table: str
    key_value: Optional[str] = None
    key_column: Optional[str] = None  # WHERE column, or first INSERT column
    assignments: tuple[tuple[str, str], ...] = ()
    projection: tuple[str, ...] = ()  # ("*",) for SELECT *
    columns: tuple[str, ...] = ()  # CREATE TABLE column list, key first

    @property
    def select_all(self) -> bool:
        return self.projection == ("*",)


@dataclass(frozen=True)
class EncryptedCommand:
    """A statement after name anonymization and value encryption."""
    op: QueryOp
    table_pseudonym: str
    key_ct: Optional[Ciphertext] = None
    cells: tuple[tuple[str, Ciphertext], ...] = ()
    projection_pseudonyms: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class NodeId:
    index: int

    def __str__(self) -> str:
        return f"node-{self.index}"


@dataclass(frozen=True)
class RingEntry:
    node: NodeId
    token: int


@dataclass(frozen=True)
class ClusterRing:
    """Token ring; entries are kept in strictly increasing token order."""
    entries: tuple[RingEntry, ...]
    replication_factor: int = 4
    consistency: Consistency = Consistency.ONE

    @property
    def nodes(self) -> list[NodeId]:
        return [e.node for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class StoredRow:
    """Row as held by a storage node. Cell map is never mutated in place."""
    key_ct: bytes
    cells: dict[str, bytes] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not self.key_ct:
            raise ValueError("Stored row key must be non-empty")


@dataclass(frozen=True)
class StoreResult:
    status: StoreStatus
    row: Optional[StoredRow] = None

    @property
    def found(self) -> bool:
        return self.status is StoreStatus.OK and self.row is not None


# ---------------------------------------------------------------------------
# proxy / client
# ---------------------------------------------------------------------------

@dataclass
class ProxyConfig:
    """Deployment parameters of one proxy instance."""
    proxy_id: int = 0
    host: str = "127.0.0.1"
    port: int = 0
    coordinator_policy: CoordinatorPolicy = CoordinatorPolicy.PINNED
    pinned_node: int = 0
    node_count: int = 4
    service_delay_us: int = 0
    workers: int = 1
    ledger_path: Optional[str] = None


@dataclass(frozen=True)
class QueryResult:
    """Client-side view of one response frame."""
    error_code: Optional[ErrorCode] = None
    message: str = ""
    cells: tuple[tuple[str, str], ...] = ()
    rows: bool = False  # ROWS response, possibly with no cells

    @property
    def ok(self) -> bool:
        return self.error_code is None

    def as_dict(self) -> dict[str, str]:
        return dict(self.cells)


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@dataclass
class WorkloadSpec:
    """YCSB-style workload definition."""
    record_count: int = 40_000
    operation_count: int = 40_000
    read_proportion: float = 0.5
    distribution: Distribution = Distribution.ZIPFIAN
    value_length: int = 100
    field_count: int = 10
    table: str = "usertable"
    key_column: str = "ycsb_key"

    @property
    def write_proportion(self) -> float:
        return 1.0 - self.read_proportion

    @property
    def field_names(self) -> list[str]:
        return [f"field{i}" for i in range(self.field_count)]

    def schema(self) -> SchemaDef:
        return SchemaDef(self.table, self.key_column, tuple(self.field_names))

    def to_dict(self) -> dict:
        return {
            "record_count": self.record_count,
            "operation_count": self.operation_count,
            "read_proportion": self.read_proportion,
            "distribution": self.distribution.value,
            "value_length": self.value_length,
            "field_count": self.field_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorkloadSpec":
        return cls(
            record_count=data.get("record_count", 40_000),
            operation_count=data.get("operation_count", 40_000),
            read_proportion=data.get("read_proportion", 0.5),
            distribution=Distribution(data.get("distribution", "zipfian")),
            value_length=data.get("value_length", 100),
            field_count=data.get("field_count", 10),
        )


WORKLOAD_PRESETS = {
    "workload-a": 0.5,
    "workload-b": 0.95,
}


@dataclass
class MetricsSample:
    """Aggregated measurements of one run phase."""
    model: ModelKind
    clients: int
    proxies: int
    throughput: float
    read_latency_avg: float  # microseconds
    write_latency_avg: float  # microseconds
    error_count: int = 0
    reads: int = 0
    writes: int = 0
    read_p95: float = 0.0
    read_p99: float = 0.0
    write_p95: float = 0.0
    write_p99: float = 0.0
    repetition: int = 0


@dataclass(frozen=True)
class ZipfianState:
    item_count: int
    theta: float
    zeta: float
    seed: int


# ---------------------------------------------------------------------------
# sla
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlaModel:
    """Fitted surface f(p, n) for one metric, degree 2 in p and 3 in n."""
    metric: Metric
    coefficients: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.coefficients) != len(COEFFICIENT_NAMES):
            raise ValueError(
                f"SLA model needs {len(COEFFICIENT_NAMES)} coefficients, got {len(self.coefficients)}"
            )

    def named(self) -> dict[str, float]:
        return dict(zip(COEFFICIENT_NAMES, self.coefficients))


@dataclass(frozen=True)
class SlaOffer:
    """One service package of the SLA table."""
    p: int
    n_max: int
    t_min: float  # ops/sec
    l_r_max: float  # microseconds
    l_w_max: float  # microseconds


# ---------------------------------------------------------------------------
# cli / topology
# ---------------------------------------------------------------------------

@dataclass
class DeploymentModel:
    """Topology shape for one deployment model."""
    kind: ModelKind = ModelKind.ENC_M1
    node_count: int = 4
    proxy_count: int = 1
    coordinator_policy: CoordinatorPolicy = CoordinatorPolicy.PINNED
    replication_factor: int = 4

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "node_count": self.node_count,
            "proxy_count": self.proxy_count,
            "coordinator_policy": self.coordinator_policy.value,
            "replication_factor": self.replication_factor,
        }

    @classmethod
    def for_kind(cls, kind: ModelKind, node_count: int = 4, proxy_count: Optional[int] = None) -> "DeploymentModel":
        """Default shape of a model: EncM3 rotates coordinators, the rest pin."""
        if proxy_count is None:
            proxy_count = {ModelKind.NO_ENC: 0, ModelKind.ENC_M1: 1}.get(kind, 2)
        policy = CoordinatorPolicy.ROTATE if kind is ModelKind.ENC_M3 else CoordinatorPolicy.PINNED
        return cls(
            kind=kind,
            node_count=node_count,
            proxy_count=proxy_count,
            coordinator_policy=policy,
            replication_factor=min(4, node_count),
        )


@dataclass
class BenchSettings:
    """Sweep grid and output options."""
    seed: int = 42
    repetitions: int = 10
    clients: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16, 32])
    proxies: list[int] = field(default_factory=lambda: [1])
    out: str = "bench.csv"


@dataclass
class AppConfig:
    """Complete runtime configuration."""
    deployment: DeploymentModel = field(default_factory=DeploymentModel)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    bench: BenchSettings = field(default_factory=BenchSettings)
    mode: RunMode = RunMode.LOCAL
    host: str = "127.0.0.1"
    base_port: int = 9400
    service_delay_us: int = 0
    proxy_workers: int = 1
    ledger_dir: Optional[str] = None
    master_key_file: Optional[str] = None


@dataclass
class ValidationIssue:
    """A configuration problem."""
    severity: ValidationSeverity
    code: str
    message: str
    context: dict = field(default_factory=dict)

    def __str__(self) -> str:
        return f"[{self.severity.name}] {self.code}: {self.message}"


def is_identifier(name: str) -> bool:
    """ASCII identifier: letter or underscore, then letters, digits, underscores."""
    if not name or not isinstance(name, str):
        return False
    if not (name[0].isascii() and (name[0].isalpha() or name[0] == "_")):
        return False
    return all(ch.isascii() and (ch.isalnum() or ch == "_") for ch in name)

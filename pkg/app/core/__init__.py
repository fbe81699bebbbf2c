"""Core module initialization."""
from .errors import (
    SecNoSqlError,
    KeyDerivationError,
    DecryptionError,
    QueryParseError,
    UnsupportedPredicateError,
    SchemaError,
    NotFoundError,
    IntegrityError,
    BackendError,
    ProtocolError,
    FitError,
    ConfigError,
    BenchCorrectnessError,
)
from .types import (
    MASTER_KEY_BYTES,
    AES_KEY_BYTES,
    BLOCK_BYTES,
    TAG_BYTES,
    COEFFICIENT_NAMES,
    WORKLOAD_PRESETS,
    Scheme,
    NameKind,
    QueryOp,
    ErrorCode,
    Consistency,
    StoreStatus,
    CoordinatorPolicy,
    ModelKind,
    RunMode,
    Distribution,
    Metric,
    ValidationSeverity,
    MasterKey,
    KeySet,
    Ciphertext,
    HmacTag,
    SchemaDef,
    QueryAst,
    EncryptedCommand,
    NodeId,
    RingEntry,
    ClusterRing,
    StoredRow,
    StoreResult,
    ProxyConfig,
    QueryResult,
    WorkloadSpec,
    MetricsSample,
    ZipfianState,
    SlaModel,
    SlaOffer,
    DeploymentModel,
    BenchSettings,
    AppConfig,
    ValidationIssue,
    is_identifier,
)
from .validation import ValidationEngine, errors_only

__all__ = [
    "SecNoSqlError",
    "KeyDerivationError",
    "DecryptionError",
    "QueryParseError",
    "UnsupportedPredicateError",
    "SchemaError",
    "NotFoundError",
    "IntegrityError",
    "BackendError",
    "ProtocolError",
    "FitError",
    "ConfigError",
    "BenchCorrectnessError",
    "MASTER_KEY_BYTES",
    "AES_KEY_BYTES",
    "BLOCK_BYTES",
    "TAG_BYTES",
    "COEFFICIENT_NAMES",
    "WORKLOAD_PRESETS",
    "Scheme",
    "NameKind",
    "QueryOp",
    "ErrorCode",
    "Consistency",
    "StoreStatus",
    "CoordinatorPolicy",
    "ModelKind",
    "RunMode",
    "Distribution",
    "Metric",
    "ValidationSeverity",
    "MasterKey",
    "KeySet",
    "Ciphertext",
    "HmacTag",
    "SchemaDef",
    "QueryAst",
    "EncryptedCommand",
    "NodeId",
    "RingEntry",
    "ClusterRing",
    "StoredRow",
    "StoreResult",
    "ProxyConfig",
    "QueryResult",
    "WorkloadSpec",
    "MetricsSample",
    "ZipfianState",
    "SlaModel",
    "SlaOffer",
    "DeploymentModel",
    "BenchSettings",
    "AppConfig",
    "ValidationIssue",
    "is_identifier",
    "ValidationEngine",
    "errors_only",
]

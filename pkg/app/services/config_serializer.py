"""
Configuration serialization and deserialization.

Handles saving and loading of AppConfig to/from JSON format. Unknown keys
are ignored and missing keys fall back to defaults, so old files keep
loading as fields are added.
"""

import json
from pathlib import Path
from typing import Any, Dict

from ..core import (
    AppConfig,
    BenchSettings,
    ConfigError,
    CoordinatorPolicy,
    DeploymentModel,
    ModelKind,
    RunMode,
    WorkloadSpec,
)


class ConfigSerializer:
    """Serializes and deserializes AppConfig to/from JSON."""

    # Format version for future compatibility
    FORMAT_VERSION = "1.0"

    @staticmethod
    def serialize(config: AppConfig) -> Dict[str, Any]:
        return {
            "format_version": ConfigSerializer.FORMAT_VERSION,
            "deployment": config.deployment.to_dict(),
            "workload": config.workload.to_dict(),
            "bench": ConfigSerializer._serialize_bench(config.bench),
            "mode": config.mode.value,
            "host": config.host,
            "base_port": config.base_port,
            "service_delay_us": config.service_delay_us,
            "proxy_workers": config.proxy_workers,
            "ledger_dir": config.ledger_dir,
            "master_key_file": config.master_key_file,
        }

    @staticmethod
    def deserialize(data: Dict[str, Any]) -> AppConfig:
        version = data.get("format_version", ConfigSerializer.FORMAT_VERSION)
        if version != ConfigSerializer.FORMAT_VERSION:
            raise ConfigError(
                f"Unsupported config format version: {version}. "
                f"Expected {ConfigSerializer.FORMAT_VERSION}"
            )

        defaults = AppConfig()
        try:
            return AppConfig(
                deployment=ConfigSerializer._deserialize_deployment(data.get("deployment", {})),
                workload=WorkloadSpec.from_dict(data.get("workload", {})),
                bench=ConfigSerializer._deserialize_bench(data.get("bench", {})),
                mode=RunMode(data.get("mode", defaults.mode.value)),
                host=data.get("host", defaults.host),
                base_port=int(data.get("base_port", defaults.base_port)),
                service_delay_us=int(data.get("service_delay_us", defaults.service_delay_us)),
                proxy_workers=int(data.get("proxy_workers", defaults.proxy_workers)),
                ledger_dir=data.get("ledger_dir"),
                master_key_file=data.get("master_key_file"),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid config: {e}") from None

    @staticmethod
    def save_to_file(config: AppConfig, file_path: Path) -> None:
        data = ConfigSerializer.serialize(config)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w") as f:
            json.dump(data, f, indent=2)

    @staticmethod
    def load_from_file(file_path: Path) -> AppConfig:
        if not file_path.exists():
            raise ConfigError(f"Config file not found: {file_path}")
        try:
            with open(file_path, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {file_path} is not valid JSON: {e}") from None
        return ConfigSerializer.deserialize(data)

    # ========== Sections ==========

    @staticmethod
    def _deserialize_deployment(data: Dict[str, Any]) -> DeploymentModel:
        kind = ModelKind.parse(data.get("kind", DeploymentModel().kind.value))
        node_count = int(data.get("node_count", 4))
        model = DeploymentModel.for_kind(kind, node_count, data.get("proxy_count"))
        if "coordinator_policy" in data:
            model.coordinator_policy = CoordinatorPolicy(data["coordinator_policy"])
        if "replication_factor" in data:
            model.replication_factor = int(data["replication_factor"])
        return model

    @staticmethod
    def _serialize_bench(bench: BenchSettings) -> Dict[str, Any]:
        return {
            "seed": bench.seed,
            "repetitions": bench.repetitions,
            "clients": list(bench.clients),
            "proxies": list(bench.proxies),
            "out": bench.out,
        }

    @staticmethod
    def _deserialize_bench(data: Dict[str, Any]) -> BenchSettings:
        defaults = BenchSettings()
        return BenchSettings(
            seed=int(data.get("seed", defaults.seed)),
            repetitions=int(data.get("repetitions", defaults.repetitions)),
            clients=[int(n) for n in data.get("clients", defaults.clients)],
            proxies=[int(p) for p in data.get("proxies", defaults.proxies)],
            out=data.get("out", defaults.out),
        )

"""
Validation engine for deployment configurations.

Structured validation rules that must pass before a topology starts.
Returns ValidationIssue list; ERROR severity blocks `up` and `sweep`.
"""

from typing import List

from .types import (
    AppConfig,
    CoordinatorPolicy,
    DeploymentModel,
    ModelKind,
    RunMode,
    ValidationIssue,
    ValidationSeverity,
    WorkloadSpec,
)


class ValidationEngine:
    """Validates deployment and workload configurations."""

    @staticmethod
    def validate_config(config: AppConfig) -> List[ValidationIssue]:
        """
        Validate a complete configuration.

        Returns list of ValidationIssue; startup is blocked if any ERROR present.
        """
        issues = []

        # 1. Topology shape per deployment model
        issues.extend(ValidationEngine.validate_deployment(config.deployment))

        # 2. Workload parameters
        issues.extend(ValidationEngine.validate_workload(config.workload))

        # 3. Runtime knobs
        issues.extend(ValidationEngine._validate_runtime(config))

        # 4. Every proxy must own at least one key
        if config.deployment.proxy_count > config.workload.record_count > 0:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="RECORDS_PER_PROXY",
                    message="record_count must be at least the proxy count; keys are partitioned by proxy.",
                    context={
                        "record_count": config.workload.record_count,
                        "proxy_count": config.deployment.proxy_count,
                    },
                )
            )

        return issues

    @staticmethod
    def validate_deployment(model: DeploymentModel) -> List[ValidationIssue]:
        """Validate node/proxy counts against the model definition."""
        issues = []

        if model.node_count < 1:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="NO_NODES",
                    message="At least one storage node is required.",
                    context={"node_count": model.node_count},
                )
            )
            return issues

        if not 1 <= model.replication_factor <= model.node_count:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="BAD_REPLICATION_FACTOR",
                    message=(
                        f"Replication factor {model.replication_factor} must be between 1 "
                        f"and the node count {model.node_count}."
                    ),
                    context={"replication_factor": model.replication_factor},
                )
            )

        kind = model.kind
        if kind is ModelKind.NO_ENC and model.proxy_count != 0:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="NOENC_WITH_PROXY",
                    message="NoEnc clients connect directly to the cluster; proxy_count must be 0.",
                    context={"proxy_count": model.proxy_count},
                )
            )
        elif kind is ModelKind.ENC_M1 and model.proxy_count != 1:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="ENCM1_PROXY_COUNT",
                    message="EncM1 uses exactly one dedicated proxy.",
                    context={"proxy_count": model.proxy_count},
                )
            )
        elif kind in (ModelKind.ENC_M2, ModelKind.ENC_M3) and model.proxy_count < 2:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="MULTI_PROXY_COUNT",
                    message=f"{kind.value} needs at least two proxies.",
                    context={"proxy_count": model.proxy_count},
                )
            )

        # Policy knob is free, but the usual reading is worth flagging
        expected = CoordinatorPolicy.ROTATE if kind is ModelKind.ENC_M3 else CoordinatorPolicy.PINNED
        if kind.encrypted and kind is not ModelKind.ENC_M1 and model.coordinator_policy is not expected:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.WARNING,
                    code="UNUSUAL_COORDINATOR_POLICY",
                    message=(
                        f"{kind.value} normally uses the '{expected.value}' coordinator policy, "
                        f"configured '{model.coordinator_policy.value}'."
                    ),
                    context={"policy": model.coordinator_policy.value},
                )
            )

        return issues

    @staticmethod
    def validate_workload(spec: WorkloadSpec) -> List[ValidationIssue]:
        """Validate workload counts and proportions."""
        issues = []

        if spec.record_count <= 0 or spec.operation_count <= 0:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="BAD_COUNTS",
                    message="record_count and operation_count must be positive.",
                    context={
                        "record_count": spec.record_count,
                        "operation_count": spec.operation_count,
                    },
                )
            )

        if not 0.0 <= spec.read_proportion <= 1.0:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="BAD_READ_PROPORTION",
                    message=f"read_proportion {spec.read_proportion} is outside [0, 1].",
                    context={"read_proportion": spec.read_proportion},
                )
            )

        if spec.field_count < 1 or spec.value_length < 1:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="BAD_RECORD_SHAPE",
                    message="field_count and value_length must be at least 1.",
                    context={"field_count": spec.field_count, "value_length": spec.value_length},
                )
            )

        return issues

    @staticmethod
    def _validate_runtime(config: AppConfig) -> List[ValidationIssue]:
        """Validate delays, pools and ports."""
        issues = []

        if config.service_delay_us < 0:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="NEGATIVE_SERVICE_DELAY",
                    message="service_delay_us must be >= 0.",
                    context={"service_delay_us": config.service_delay_us},
                )
            )

        if config.proxy_workers < 1:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="NO_PROXY_WORKERS",
                    message="proxy_workers must be >= 1.",
                    context={"proxy_workers": config.proxy_workers},
                )
            )

        if config.mode is not RunMode.LOCAL and not 0 <= config.base_port < 65536:
            issues.append(
                ValidationIssue(
                    severity=ValidationSeverity.ERROR,
                    code="BAD_PORT",
                    message=f"base_port {config.base_port} is not a usable TCP port (0 picks free ports).",
                    context={"base_port": config.base_port},
                )
            )

        return issues


def errors_only(issues: List[ValidationIssue]) -> List[ValidationIssue]:
    return [i for i in issues if i.severity == ValidationSeverity.ERROR]

"""Geometric simulation and control of a quadrotor with a flexible tether."""

from ._core import (
    AuditError,
    AuditReport,
    ConfigError,
    LinearizedModel,
    LyapunovCertificate,
    NumericalError,
    RunMetrics,
    RunResult,
    ScenarioConfig,
    StabilizerGains,
    SystemParams,
    TautGains,
    Trajectory,
    closed_loop_matrix,
    energies,
    hanging_chain,
    link_accelerations,
    linearize,
    load_scenario,
    lyapunov_certificate,
    make_params,
    parse_scenario,
    parse_trajectory_csv,
    positions,
    preset_names,
    quad_positions,
    run_audit,
    run_scenario,
    serialize_scenario,
    synthesize_gains,
    tension,
    trajectory_csv,
)

__all__ = [
    "AuditError",
    "AuditReport",
    "ConfigError",
    "LinearizedModel",
    "LyapunovCertificate",
    "NumericalError",
    "RunMetrics",
    "RunResult",
    "ScenarioConfig",
    "StabilizerGains",
    "SystemParams",
    "TautGains",
    "Trajectory",
    "closed_loop_matrix",
    "energies",
    "hanging_chain",
    "link_accelerations",
    "linearize",
    "load_scenario",
    "lyapunov_certificate",
    "make_params",
    "parse_scenario",
    "parse_trajectory_csv",
    "positions",
    "preset_names",
    "quad_positions",
    "run_audit",
    "run_scenario",
    "serialize_scenario",
    "synthesize_gains",
    "tension",
    "trajectory_csv",
]

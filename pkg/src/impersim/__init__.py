"""Deterministic simulator for synchronous protocols under impersonation attacks."""

from .engine import (
    Decision,
    EngineConfig,
    RunResult,
    emit_trace,
    enforce_budget,
    load_trace,
    replay_decisions,
    run_protocol,
    validate_config,
)
from .messages import Envelope, Origin, ProcessorId, RoundInbox, processor_ids
from .scenario import ScenarioConfig, load_scenario, monte_carlo, run_scenario

__version__ = "0.1.0"

__all__ = [
    "Decision",
    "EngineConfig",
    "Envelope",
    "Origin",
    "ProcessorId",
    "RoundInbox",
    "RunResult",
    "ScenarioConfig",
    "emit_trace",
    "enforce_budget",
    "load_scenario",
    "load_trace",
    "monte_carlo",
    "processor_ids",
    "replay_decisions",
    "run_protocol",
    "run_scenario",
    "validate_config",
    "__version__",
]

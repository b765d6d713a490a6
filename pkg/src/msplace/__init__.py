"""Microservice instance placement on edge servers, minimizing average response time."""

from msplace.chains import DemandSummary, FunctionChain, build_chains, calling_subgraph_to_chain, demand_summary
from msplace.evaluator import (
    EvaluationReport,
    check_constraints,
    chain_average_time_fpp,
    chain_average_time_qsrfp,
    system_average_time,
)
from msplace.generator import GeneratorConfig, generate_scenario
from msplace.model import (
    DeploymentScheme,
    Scenario,
    load_scenario,
    load_scheme,
    save_scenario,
    save_scheme,
    validate_scenario,
)
from msplace.solvers import ALGORITHMS, SolverResult, solve

__all__ = [
    "ALGORITHMS",
    "DemandSummary",
    "DeploymentScheme",
    "EvaluationReport",
    "FunctionChain",
    "GeneratorConfig",
    "Scenario",
    "SolverResult",
    "build_chains",
    "calling_subgraph_to_chain",
    "chain_average_time_fpp",
    "chain_average_time_qsrfp",
    "check_constraints",
    "demand_summary",
    "generate_scenario",
    "load_scenario",
    "load_scheme",
    "save_scenario",
    "save_scheme",
    "solve",
    "system_average_time",
    "validate_scenario",
]

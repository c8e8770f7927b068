"""Workflow canvas toolkit: graph DSL, canvas environment, rewards, policy tools."""

from ._core import (
    Canvas,
    describe_library,
    exact_match,
    f1_score,
    gated_total,
    group_advantages,
    normalize_answer,
    numeric_accuracy,
    parse_dsl_roundtrip,
    parse_turn_kind,
    pass_at_k,
    run_scripted_episode,
    sandbox_execute,
    structural_checks,
    surrogate_objective,
    toy_train,
    validate_dsl,
    __version__,
)

__all__ = [
    "Canvas",
    "describe_library",
    "exact_match",
    "f1_score",
    "gated_total",
    "group_advantages",
    "normalize_answer",
    "numeric_accuracy",
    "parse_dsl_roundtrip",
    "parse_turn_kind",
    "pass_at_k",
    "run_scripted_episode",
    "sandbox_execute",
    "structural_checks",
    "surrogate_objective",
    "toy_train",
    "validate_dsl",
    "__version__",
]

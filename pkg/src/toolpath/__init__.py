"""Evaluation engine for multi-task, tool-using agents.

Enumerates every valid execution path of a tool-dependency DAG, matches agent
trajectories against the resulting decision tree, and aggregates accuracy,
progress, optimal-path and robustness metrics across challenge protocols.
"""

from .graph import DependencyGraph, build_graph, derive_policy_subtype, frontier
from .matcher import ErrorClass, MatchResult, advance, classify_error, finalize
from .metrics import CrossTab, acc2, cross_tab, ddd, group_metrics, ptf, vf
from .model import (
    ChallengeMode,
    HidingStrategy,
    PolicyType,
    StepGroup,
    Task,
    TestCase,
    ToolCall,
    ToolSpec,
    canonicalize_arguments,
    classify_output,
)
from .paths import build_decision_tree, classify_paths, enumerate_paths

__version__ = "0.1.0"

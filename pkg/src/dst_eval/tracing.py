"""Per-conversation error traces and corpus-level propagation statistics."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .metrics import TurnClass, TurnKind, check_lambda, classify_turns, turn_weight
from .model import Conversation


@dataclass(frozen=True)
class TraceEntry:
    turn_index: int
    turn_class: TurnClass
    active_t_err: Optional[int]
    weights: Dict[float, float]


@dataclass(frozen=True)
class ErrorTrace:
    conversation_id: str
    entries: List[TraceEntry]
    lambdas: List[float]

    def fga(self, lam: float) -> float:
        return sum(e.weights[lam] for e in self.entries) / len(self.entries)


def trace_conversation(conv: Conversation, lambdas: Sequence[float]) -> ErrorTrace:
    lambdas = [check_lambda(l) for l in lambdas]
    if not lambdas:
        raise ValueError("at least one lambda is required")
    entries = []
    t_err = None
    for t, cls in enumerate(classify_turns(conv)):
        if cls.kind is TurnKind.TYPE1:
            t_err = t
        entries.append(TraceEntry(t, cls, t_err, {lam: turn_weight(cls, lam) for lam in lambdas}))
    return ErrorTrace(conv.id, entries, lambdas)


def _class_label(cls: TurnClass) -> str:
    if cls.kind is TurnKind.TYPE2:
        return f"2(x={cls.distance})" if isinstance(cls.distance, int) else "2(x=inf)"
    return cls.kind.value


def lambda_label(lam: float) -> str:
    return format(lam, "g")


def render_trace_text(trace: ErrorTrace) -> str:
    """One line per turn: index, class, active error turn and weight per lambda."""
    header = ["turn", "class", "t_err"] + [f"w@{lambda_label(l)}" for l in trace.lambdas]
    rows = [header]
    for e in trace.entries:
        rows.append(
            [str(e.turn_index), _class_label(e.turn_class),
             "-" if e.active_t_err is None else str(e.active_t_err)]
            + [f"{e.weights[l]:.4f}" for l in trace.lambdas]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [f"# dialogue {trace.conversation_id}"]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    lines.append("FGA " + "  ".join(f"@{lambda_label(l)}={trace.fga(l):.6f}" for l in trace.lambdas))
    return "\n".join(lines) + "\n"


def trace_to_dict(trace: ErrorTrace) -> dict:
    return {
        "dialogue_id": trace.conversation_id,
        "lambdas": trace.lambdas,
        "turns": [
            {
                "turn_index": e.turn_index,
                "class": e.turn_class.kind.value,
                "distance": (None if e.turn_class.distance is None
                             else e.turn_class.distance if isinstance(e.turn_class.distance, int)
                             else "unbounded"),
                "t_err": e.active_t_err,
                "weights": {lambda_label(l): e.weights[l] for l in trace.lambdas},
            }
            for e in trace.entries
        ],
        "fga": {lambda_label(l): trace.fga(l) for l in trace.lambdas},
    }


def render_trace_json(trace: ErrorTrace) -> str:
    return json.dumps(trace_to_dict(trace), sort_keys=True) + "\n"


@dataclass
class PropagationStats:
    exact_count: int = 0
    type1_count: int = 0
    type2_count: int = 0
    first_error_turn_histogram: Counter = field(default_factory=Counter)
    error_run_length_histogram: Counter = field(default_factory=Counter)

    @property
    def total_turns(self) -> int:
        return self.exact_count + self.type1_count + self.type2_count

    def __add__(self, other: "PropagationStats") -> "PropagationStats":
        return PropagationStats(
            self.exact_count + other.exact_count,
            self.type1_count + other.type1_count,
            self.type2_count + other.type2_count,
            self.first_error_turn_histogram + other.first_error_turn_histogram,
            self.error_run_length_histogram + other.error_run_length_histogram,
        )


def propagation_stats(convs: Sequence[Conversation]) -> PropagationStats:
    """Count turn classes, first-error positions and error-run lengths.

    An error run is a maximal span of consecutive non-exact turns; Type-2
    turns extend a run and only an exact match closes it.
    """
    stats = PropagationStats()
    for conv in convs:
        run = 0
        first_error = None
        for t, cls in enumerate(classify_turns(conv)):
            if cls.kind is TurnKind.EXACT:
                stats.exact_count += 1
                if run:
                    stats.error_run_length_histogram[run] += 1
                run = 0
                continue
            if cls.kind is TurnKind.TYPE1:
                stats.type1_count += 1
            else:
                stats.type2_count += 1
            if first_error is None:
                first_error = t
            run += 1
        if run:
            stats.error_run_length_histogram[run] += 1
        if first_error is not None:
            stats.first_error_turn_histogram[first_error] += 1
    return stats

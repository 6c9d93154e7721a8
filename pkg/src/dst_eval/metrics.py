"""Metric kernels for dialogue state tracking.

Turn-level kernels work on Python sets and follow the metric definitions
directly. :func:`evaluate_dataset` runs the same logic over a whole corpus
through the array kernels in :mod:`dst_eval._kernels`, reducing every
conversation to integer counts so results do not depend on evaluation order.
"""
from __future__ import annotations

import enum
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels as K
from .errors import DomainError, InputMismatch, OntologyEmpty, SlotAccuracyRange
from .model import (
    DEFAULT_POLICY,
    EMPTY_STATE,
    BeliefState,
    Conversation,
    NormalizationPolicy,
    Ontology,
    project_pairs,
)

DEFAULT_LAMBDAS = (0.25, 0.5, 0.75, 1.0)


class _Unbounded:
    """Distance to an error that never happened (``t_err`` still at minus infinity)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()
Distance = Union[int, _Unbounded]


class TurnKind(enum.Enum):
    EXACT = "E"
    TYPE1 = "1"
    TYPE2 = "2"


@dataclass(frozen=True)
class TurnClass:
    kind: TurnKind
    distance: Optional[Distance] = None

    def __post_init__(self):
        if self.kind is TurnKind.TYPE2:
            if self.distance is None:
                raise ValueError("Type-2 turns need a distance")
            if self.distance is not UNBOUNDED and self.distance < 1:
                raise ValueError(f"Type-2 distance must be >= 1, got {self.distance}")
        elif self.distance is not None:
            raise ValueError(f"{self.kind.name} turns carry no distance")


EXACT_MATCH = TurnClass(TurnKind.EXACT)
TYPE1 = TurnClass(TurnKind.TYPE1)


def check_lambda(lam: float) -> float:
    lam = float(lam)
    if math.isnan(lam) or lam < 0:
        raise DomainError(f"lambda must be a non-negative real, got {lam}")
    return lam


# ---------------------------------------------------------------------------
# turn-level kernels

def exact_match(gt: BeliefState, pred: BeliefState) -> bool:
    return gt == pred


def turn_delta(current: BeliefState, previous: BeliefState) -> BeliefState:
    """Triplets new at this turn; a value overwrite shows up as a fresh triplet."""
    return current - previous


def local_match(t: int, gt_cur: BeliefState, pred_cur: BeliefState,
                gt_prev: BeliefState = EMPTY_STATE, pred_prev: BeliefState = EMPTY_STATE) -> bool:
    """Whether turn ``t``'s own contribution was predicted correctly.

    The turn-level prediction must add nothing outside the ground truth and
    the ground truth's new triplets must all be predicted. Comparing the two
    deltas for equality instead would penalize turns that fix an earlier
    mistake. The first turn has no history, so it is local iff exact.
    """
    if t == 0:
        return exact_match(gt_cur, pred_cur)
    return (turn_delta(pred_cur, pred_prev) <= gt_cur
            and turn_delta(gt_cur, gt_prev) <= pred_cur)


def fga_weight(distance: Distance, lam: float) -> float:
    """Partial credit ``1 - exp(-lam * distance)`` for a Type-2 turn."""
    lam = check_lambda(lam)
    if lam == 0.0:
        return 0.0
    if distance is UNBOUNDED:
        return 1.0
    if distance < 1:
        raise DomainError(f"distance must be >= 1, got {distance}")
    return 1.0 - math.exp(-lam * distance)


def classify_turns(conv: Conversation) -> List[TurnClass]:
    classes = []
    t_err = None
    gt_prev = pred_prev = EMPTY_STATE
    for t, turn in enumerate(conv.turns):
        gt, pred = turn.ground_truth, turn.prediction
        if exact_match(gt, pred):
            classes.append(EXACT_MATCH)
        elif t == 0 or not local_match(t, gt, pred, gt_prev, pred_prev):
            classes.append(TYPE1)
            t_err = t
        else:
            classes.append(TurnClass(TurnKind.TYPE2, UNBOUNDED if t_err is None else t - t_err))
        gt_prev, pred_prev = gt, pred
    return classes


def turn_weight(cls: TurnClass, lam: float) -> float:
    if cls.kind is TurnKind.EXACT:
        return 1.0
    if cls.kind is TurnKind.TYPE1:
        return 0.0
    return fga_weight(cls.distance, lam)


def fga_conversation(conv: Conversation, lam: float) -> float:
    lam = check_lambda(lam)
    f = 0.0
    for cls in classify_turns(conv):
        f += turn_weight(cls, lam)
    return f / len(conv.turns)


def _slot_errors(gt: BeliefState, pred: BeliefState) -> int:
    x = gt - pred
    y = pred - gt
    return len(x) + len(y) - len(project_pairs(x) & project_pairs(y))


def _ontology_size(ont) -> int:
    size = len(ont.pairs) if ont is not None else 0
    if size == 0:
        raise OntologyEmpty("slot accuracy needs an ontology with at least one pair")
    return size


def slot_accuracy_turn(gt: BeliefState, pred: BeliefState, ont: Ontology) -> float:
    """Slot accuracy for one turn.

    A wrong value for a ground-truth pair appears once among the misses and
    once among the false alarms; counting the pairs shared by both sides
    removes that double count.
    """
    size = _ontology_size(ont)
    errors = _slot_errors(gt, pred)
    if errors > size:
        raise SlotAccuracyRange(
            f"{errors} distinct slot errors exceed the ontology size {size}"
        )
    return (size - errors) / size


def _nonempty(state: BeliefState, policy: NormalizationPolicy) -> BeliefState:
    return frozenset(t for t in state if not policy.is_empty(t.value))


def aga_turn(gt: BeliefState, pred: BeliefState,
             policy: NormalizationPolicy = DEFAULT_POLICY) -> Optional[float]:
    """Recall of the non-empty ground-truth triplets; None when there are none."""
    targets = _nonempty(gt, policy)
    if not targets:
        return None
    return len(targets & pred) / len(targets)


def aga_turn_jaccard(gt: BeliefState, pred: BeliefState,
                     policy: NormalizationPolicy = DEFAULT_POLICY) -> Optional[float]:
    """Jaccard overlap of non-empty ground truth and non-empty prediction."""
    targets = _nonempty(gt, policy)
    guesses = _nonempty(pred, policy)
    union = targets | guesses
    if not union:
        return None
    return len(targets & guesses) / len(union)


def lambda_from_forgetting(t_f: int, p: float) -> float:
    """Lambda under which an error's penalty has decayed by ``p`` after ``t_f`` turns."""
    if isinstance(t_f, bool) or int(t_f) != t_f or t_f < 1:
        raise DomainError(f"t_f must be a positive integer, got {t_f!r}")
    if not 0.0 <= p < 1.0:
        raise DomainError(f"p must lie in [0, 1), got {p!r}")
    return -math.log1p(-p) / int(t_f)


# ---------------------------------------------------------------------------
# corpus level

def default_workers() -> int:
    env = os.environ.get("DST_EVAL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


@dataclass(frozen=True)
class MetricConfig:
    lambdas: Tuple[float, ...] = DEFAULT_LAMBDAS
    policy: NormalizationPolicy = DEFAULT_POLICY
    ontology: Optional[Ontology] = None
    workers: int = field(default_factory=default_workers)
    backend: Optional[str] = None

    def __post_init__(self):
        lambdas = tuple(check_lambda(l) for l in self.lambdas)
        if not lambdas:
            raise DomainError("at least one lambda is required")
        object.__setattr__(self, "lambdas", lambdas)
        if self.workers < 1:
            raise DomainError("workers must be >= 1")


@dataclass
class CorpusCounts:
    """Integer sufficient statistics; adding two of these is associative."""

    n_conversations: int = 0
    n_turns: int = 0
    m1: int = 0
    m2: int = 0
    type1: int = 0
    type2_unbounded: int = 0
    type2_distances: Counter = field(default_factory=Counter)
    slot_errors: int = 0
    aga_hits: int = 0
    aga_targets: int = 0
    ignored_turns: int = 0
    jaccard_inter: int = 0
    jaccard_union: int = 0
    max_slot_errors: int = 0

    def __add__(self, other: "CorpusCounts") -> "CorpusCounts":
        return CorpusCounts(
            n_conversations=self.n_conversations + other.n_conversations,
            n_turns=self.n_turns + other.n_turns,
            m1=self.m1 + other.m1,
            m2=self.m2 + other.m2,
            type1=self.type1 + other.type1,
            type2_unbounded=self.type2_unbounded + other.type2_unbounded,
            type2_distances=self.type2_distances + other.type2_distances,
            slot_errors=self.slot_errors + other.slot_errors,
            aga_hits=self.aga_hits + other.aga_hits,
            aga_targets=self.aga_targets + other.aga_targets,
            ignored_turns=self.ignored_turns + other.ignored_turns,
            jaccard_inter=self.jaccard_inter + other.jaccard_inter,
            jaccard_union=self.jaccard_union + other.jaccard_union,
            max_slot_errors=max(self.max_slot_errors, other.max_slot_errors),
        )

    def fga(self, lam: float) -> float:
        # weights depend only on distance, so one term per distinct distance;
        # fsum makes the total independent of how conversations were chunked
        terms = [float(self.m1)]
        if lam > 0:
            terms.append(float(self.type2_unbounded))
        for dist in sorted(self.type2_distances):
            terms.append(self.type2_distances[dist] * fga_weight(dist, lam))
        return math.fsum(terms) / self.n_turns


def corpus_counts(conversations: Sequence[Conversation], policy: NormalizationPolicy = DEFAULT_POLICY,
                  backend: Optional[str] = None) -> CorpusCounts:
    """Reduce a batch of conversations to :class:`CorpusCounts`."""
    for conv in conversations:
        for turn in conv.turns:
            if turn.ground_truth is None or turn.prediction is None:
                raise InputMismatch(
                    f"dialogue {conv.id!r} turn {turn.turn_index} lacks a belief state"
                )
    if not conversations:
        return CorpusCounts()
    enc = K.encode_corpus(conversations, policy.is_empty)
    stats = K.turn_stats(enc, backend)
    kinds, dist = K.classify(enc, stats, backend)

    exact = stats[:, K.EXACT].astype(bool)
    local = stats[:, K.LOCAL].astype(bool)
    errors = stats[:, K.N_X] + stats[:, K.N_Y] - stats[:, K.N_PQ]
    targets = stats[:, K.N_NONEMPTY]
    hits = stats[:, K.N_HIT]
    union = targets + stats[:, K.N_PRED_NONEMPTY] - hits

    type2 = kinds == K.KIND_TYPE2
    bounded = dist[type2 & (dist != K.UNBOUNDED_DISTANCE)]
    values, freq = np.unique(bounded, return_counts=True)
    return CorpusCounts(
        n_conversations=enc.n_conversations,
        n_turns=enc.n_turns,
        m1=int(exact.sum()),
        m2=int(local.sum()),
        type1=int((kinds == K.KIND_TYPE1).sum()),
        type2_unbounded=int((type2 & (dist == K.UNBOUNDED_DISTANCE)).sum()),
        type2_distances=Counter({int(v): int(c) for v, c in zip(values, freq)}),
        slot_errors=int(errors.sum()),
        aga_hits=int(hits.sum()),
        aga_targets=int(targets.sum()),
        ignored_turns=int((targets == 0).sum()),
        jaccard_inter=int(hits.sum()),
        jaccard_union=int(union.sum()),
        max_slot_errors=int(errors.max()) if errors.size else 0,
    )


def _chunks(items, n):
    size = math.ceil(len(items) / n)
    return [items[i:i + size] for i in range(0, len(items), size)]


@dataclass(frozen=True)
class DatasetScores:
    """Scores for one prediction set; rates are fractions in [0, 1]."""

    n_conversations: int
    n_turns: int
    m1: int
    m2: int
    jga: float
    sa: Optional[float]
    aga: Optional[float]
    aga_jaccard: Optional[float]
    fga: Dict[float, float]
    ignored_turns: int

    @property
    def turn_accuracy(self) -> float:
        return self.m2 / self.n_turns


def scores_from_counts(counts: CorpusCounts, config: MetricConfig) -> DatasetScores:
    sa = None
    if config.ontology is not None:
        size = _ontology_size(config.ontology)
        if counts.max_slot_errors > size:
            raise SlotAccuracyRange(
                f"a turn has {counts.max_slot_errors} distinct slot errors, "
                f"more than the {size} ontology pairs"
            )
        sa = (size * counts.n_turns - counts.slot_errors) / (size * counts.n_turns)
    return DatasetScores(
        n_conversations=counts.n_conversations,
        n_turns=counts.n_turns,
        m1=counts.m1,
        m2=counts.m2,
        jga=counts.m1 / counts.n_turns,
        sa=sa,
        aga=counts.aga_hits / counts.aga_targets if counts.aga_targets else None,
        aga_jaccard=counts.jaccard_inter / counts.jaccard_union if counts.jaccard_union else None,
        fga={lam: counts.fga(lam) for lam in config.lambdas},
        ignored_turns=counts.ignored_turns,
    )


def evaluate_dataset(conversations: Sequence[Conversation], config: Optional[MetricConfig] = None) -> DatasetScores:
    """Score a corpus of conversations.

    JGA and FGA are micro-averaged over turns, SA is the mean over turns,
    and both AGA variants pool numerators and denominators over the turns
    where they are defined. With ``config.workers > 1`` conversations are
    split into chunks and scored concurrently; the result is identical to a
    sequential run because chunks only contribute integer counts.
    """
    config = config or MetricConfig()
    conversations = list(conversations)
    if not conversations:
        raise InputMismatch("at least one conversation is required")
    if config.workers == 1 or len(conversations) == 1:
        counts = corpus_counts(conversations, config.policy, config.backend)
    else:
        chunks = _chunks(conversations, config.workers)
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(lambda c: corpus_counts(c, config.policy, config.backend), chunks))
        counts = sum(parts, CorpusCounts())
    return scores_from_counts(counts, config)

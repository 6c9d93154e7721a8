"""Belief-state data model and set algebra.

A belief state is a ``frozenset`` of :class:`Triplet`. Keeping it a plain
frozenset means the usual operators (``-``, ``&``, ``<=``) are the set
algebra; the named helpers below exist for readability at call sites.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, NamedTuple, Optional, Tuple

from .errors import EmptyField, OntologyEmpty, SchemaError

DEFAULT_EMPTY_VALUES = frozenset({"", "none"})


class Triplet(NamedTuple):
    domain: str
    slot: str
    value: str

    @property
    def pair(self) -> "DomainSlot":
        return DomainSlot(self.domain, self.slot)


class DomainSlot(NamedTuple):
    domain: str
    slot: str


BeliefState = FrozenSet[Triplet]
EMPTY_STATE: BeliefState = frozenset()


@dataclass(frozen=True)
class NormalizationPolicy:
    lowercase: bool = True
    trim_whitespace: bool = True
    empty_values: FrozenSet[str] = DEFAULT_EMPTY_VALUES

    def __post_init__(self):
        # normalize the vocabulary itself so membership tests see the same tokens
        object.__setattr__(
            self, "empty_values", frozenset(self.token(v) for v in self.empty_values)
        )

    def token(self, text: str) -> str:
        if self.trim_whitespace:
            text = text.strip()
        if self.lowercase:
            text = text.lower()
        return text

    def is_empty(self, value: str) -> bool:
        return value in self.empty_values


DEFAULT_POLICY = NormalizationPolicy()


def normalize_triplet(raw: Tuple[str, str, str], policy: NormalizationPolicy = DEFAULT_POLICY) -> Triplet:
    """Build a :class:`Triplet` from raw text fields.

    Raises:
        EmptyField: if the domain or slot is empty after normalization.
    """
    domain, slot, value = (policy.token(str(x)) for x in raw)
    if not domain:
        raise EmptyField(f"empty domain in triplet {tuple(raw)!r}")
    if not slot:
        raise EmptyField(f"empty slot in triplet {tuple(raw)!r}")
    return Triplet(domain, slot, value)


def belief_state(triplets: Iterable[Tuple[str, str, str]] = (), policy: Optional[NormalizationPolicy] = None) -> BeliefState:
    """Convenience constructor; normalizes only when a policy is given."""
    if policy is None:
        return frozenset(Triplet(*t) for t in triplets)
    return frozenset(normalize_triplet(t, policy) for t in triplets)


def set_difference(a: BeliefState, b: BeliefState) -> BeliefState:
    return a - b


def project_pairs(s: Iterable[Triplet]) -> FrozenSet[DomainSlot]:
    return frozenset(DomainSlot(t.domain, t.slot) for t in s)


@dataclass(frozen=True)
class Turn:
    turn_index: int
    ground_truth: BeliefState
    prediction: BeliefState
    utterances: Optional[Tuple[str, str]] = None


@dataclass(frozen=True)
class Conversation:
    id: str
    turns: Tuple[Turn, ...]

    def __post_init__(self):
        turns = tuple(self.turns)
        object.__setattr__(self, "turns", turns)
        if not turns:
            raise SchemaError(f"dialogue {self.id!r} has no turns")
        for position, turn in enumerate(turns):
            if turn.turn_index != position:
                raise SchemaError(
                    f"dialogue {self.id!r}: turn at position {position} "
                    f"has turn_index {turn.turn_index}"
                )

    def __len__(self):
        return len(self.turns)

    @classmethod
    def from_states(cls, conv_id, ground_truth, predictions) -> "Conversation":
        """Build a conversation from parallel lists of belief states."""
        if len(ground_truth) != len(predictions):
            raise SchemaError(f"dialogue {conv_id!r}: state lists differ in length")
        turns = tuple(
            Turn(i, frozenset(Triplet(*x) for x in gt), frozenset(Triplet(*x) for x in pred))
            for i, (gt, pred) in enumerate(zip(ground_truth, predictions))
        )
        return cls(conv_id, turns)


@dataclass(frozen=True)
class Ontology:
    pairs: FrozenSet[DomainSlot] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "pairs", frozenset(DomainSlot(*p) for p in self.pairs))
        if not self.pairs:
            raise OntologyEmpty("ontology must contain at least one domain-slot pair")

    @property
    def size(self) -> int:
        return len(self.pairs)

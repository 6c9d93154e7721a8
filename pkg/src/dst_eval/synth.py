"""Deterministic synthetic corpora with controllable error injection.

Errors are injected into each turn's *turn-level* prediction and then
accumulated into the cumulative predicted state, the way a real tracker
carries its mistakes forward. Every conversation draws from its own Philox
stream keyed by ``(seed, conversation index)``, so a corpus can be generated
in any order or in parallel and still come out identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .model import Conversation, DomainSlot, Ontology, Triplet, Turn


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    conversations: int = 10
    turns_per_conversation: Tuple[int, int] = (3, 8)
    n_domains: int = 3
    n_slots: int = 5
    n_values: int = 4
    p_type1: float = 0.1
    p_drop: float = 0.05
    p_spurious: float = 0.05
    p_overwrite: float = 0.1
    p_empty_value: float = 0.0
    max_new_per_turn: int = 2

    def __post_init__(self):
        lo, hi = self.turns_per_conversation
        object.__setattr__(self, "turns_per_conversation", (int(lo), int(hi)))
        if self.conversations < 1:
            raise ConfigError("conversations must be positive")
        if not 1 <= lo <= hi:
            raise ConfigError(f"invalid turn range {lo}..{hi}")
        for name in ("n_domains", "n_slots", "n_values", "max_new_per_turn"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_values < 2:
            raise ConfigError("n_values must be at least 2 so a value can be wrong")
        for name in ("p_type1", "p_drop", "p_spurious", "p_overwrite", "p_empty_value"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


def conversation_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def synth_pairs(config: SynthConfig) -> List[DomainSlot]:
    return [DomainSlot(f"dom{d}", f"slot{s}") for d in range(config.n_domains) for s in range(config.n_slots)]


def synth_ontology(config: SynthConfig) -> Ontology:
    return Ontology(frozenset(synth_pairs(config)))


def _value(config, rng, avoid=None):
    if config.p_empty_value and rng.random() < config.p_empty_value:
        value = "none"
    else:
        value = f"val{rng.integers(config.n_values)}"
    if value == avoid:
        value = f"val{(int(value[3:]) + 1) % config.n_values}" if value != "none" else "val0"
    return value


def _freeze(state):
    return frozenset(Triplet(d, s, v) for (d, s), v in state.items())


def generate_conversation(config: SynthConfig, index: int) -> Conversation:
    rng = conversation_rng(config.seed, index)
    pairs = synth_pairs(config)
    lo, hi = config.turns_per_conversation
    n_turns = int(rng.integers(lo, hi + 1))
    gt, pred = {}, {}
    turns = []
    for t in range(n_turns):
        delta = {}
        fresh = [p for p in pairs if p not in gt]
        k = int(rng.integers(1 if t == 0 else 0, config.max_new_per_turn + 1))
        k = min(k, len(fresh))
        for i in sorted(rng.choice(len(fresh), size=k, replace=False)) if k else ():
            delta[fresh[i]] = _value(config, rng)
        if gt and rng.random() < config.p_overwrite:
            held = sorted(gt)
            pair = held[int(rng.integers(len(held)))]
            delta[pair] = _value(config, rng, avoid=gt[pair])

        local = {p: v for p, v in delta.items() if rng.random() >= config.p_drop}
        if rng.random() < config.p_type1:
            if local:
                pair = sorted(local)[int(rng.integers(len(local)))]
                local[pair] = _value(config, rng, avoid=local[pair])
            else:
                pair = pairs[int(rng.integers(len(pairs)))]
                local[pair] = _value(config, rng, avoid=gt.get(pair))
        if rng.random() < config.p_spurious:
            pair = pairs[int(rng.integers(len(pairs)))]
            local[pair] = _value(config, rng)

        gt.update(delta)
        pred.update(local)
        turns.append(Turn(t, _freeze(gt), _freeze(pred), (f"system utterance {t}", f"user utterance {t}")))
    return Conversation(f"synth-{config.seed}-{index:05d}", tuple(turns))


def generate(config: SynthConfig) -> List[Conversation]:
    return [generate_conversation(config, i) for i in range(config.conversations)]


def oracle_fga(conv: Conversation, lam: float) -> float:
    """Recompute FGA with no carried state.

    Each turn's turn-level states are rebuilt from scratch and the whole
    prefix is rescanned for the latest turn whose own prediction was wrong.
    Quadratic, but independent of the streaming implementation.
    """
    gts = [turn.ground_truth for turn in conv.turns]
    preds = [turn.prediction for turn in conv.turns]

    def own_error(s):
        if gts[s] == preds[s]:
            return False
        if s == 0:
            return True
        new_gt = {x for x in gts[s] if x not in gts[s - 1]}
        new_pred = {x for x in preds[s] if x not in preds[s - 1]}
        return not (all(x in gts[s] for x in new_pred) and all(x in preds[s] for x in new_gt))

    total = 0.0
    for t in range(len(gts)):
        if gts[t] == preds[t]:
            total += 1.0
            continue
        if own_error(t):
            continue
        latest = None
        for s in range(t):
            if own_error(s):
                latest = s
        if lam == 0:
            w = 0.0
        elif latest is None:
            w = 1.0
        else:
            w = 1.0 - math.exp(-lam * (t - latest))
        total += w
    return total / len(gts)


def _turn_lengths(n_turns, n_conversations, rng):
    base, extra = divmod(n_turns, n_conversations)
    lengths = [base + 1] * extra + [base] * (n_conversations - extra)
    rng.shuffle(lengths)
    return lengths


def forced_corpus(n_turns: int, m1: int, m2: Optional[int] = None, n_conversations: int = 999,
                  seed: int = 0) -> List[Conversation]:
    """Corpus with exactly ``m1`` exact-match and ``m2`` locally-correct turns.

    Predictions are the ground truth plus "junk" triplets: no junk gives an
    exact turn, junk carried over unchanged from the previous turn gives a
    locally correct mismatch, and fresh junk gives a turn-level error.
    """
    m2 = m1 if m2 is None else m2
    if not 0 <= m1 <= m2 <= n_turns:
        raise ConfigError(f"need 0 <= m1 <= m2 <= n_turns, got {m1}, {m2}, {n_turns}")
    if not 1 <= n_conversations <= n_turns:
        raise ConfigError("need 1 <= n_conversations <= n_turns")
    rng = conversation_rng(seed, 0)
    left = {"E": m1, "L": m2 - m1, "W": n_turns - m2}
    plans = []
    for length in _turn_lengths(n_turns, n_conversations, rng):
        e = min(left["E"], length)
        rest = length - e
        labels = ["E"] * e
        if rest:
            if left["W"] == 0:
                raise ConfigError("counts not realizable: a mismatch run needs a turn-level error first")
            labels.append("W")
            left["W"] -= 1
            n_local = min(left["L"], rest - 1)
            labels += ["L"] * n_local
            left["L"] -= n_local
            n_wrong = rest - 1 - n_local
            if n_wrong > left["W"]:
                raise ConfigError("counts not realizable with these conversation lengths")
            labels += ["W"] * n_wrong
            left["W"] -= n_wrong
        left["E"] -= e
        plans.append(labels)
    if any(left.values()):
        raise ConfigError(f"counts not realizable: leftover {left}")

    junk_id = 0
    convs = []
    for c, labels in enumerate(plans):
        gt = set()
        junk = set()
        turns = []
        for t, label in enumerate(labels):
            gt.add(Triplet("dom0", f"slot{t}", f"val{c % 7}"))
            if label == "E":
                junk = set()
            elif label == "W":
                junk = {Triplet("junk", f"slot{junk_id}", "x")}
                junk_id += 1
            turns.append(Turn(t, frozenset(gt), frozenset(gt | junk)))
        convs.append(Conversation(f"forced-{c:05d}", tuple(turns)))
    return convs

"""Metric invariants checked on random conversations."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dst_eval.metrics import (
    MetricConfig,
    TurnKind,
    aga_turn,
    aga_turn_jaccard,
    classify_turns,
    evaluate_dataset,
    exact_match,
    fga_conversation,
    local_match,
    slot_accuracy_turn,
)
from dst_eval.model import Conversation, Ontology, Triplet
from dst_eval.synth import SynthConfig, generate, oracle_fga, synth_ontology

LAMBDAS = (0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 50.0)

triplets = st.builds(Triplet, st.sampled_from(["h", "r"]), st.sampled_from(["a", "b", "c"]),
                     st.sampled_from(["1", "2", "none"]))
states = st.frozensets(triplets, max_size=5)


@st.composite
def conversations(draw):
    n = draw(st.integers(1, 7))
    gts = draw(st.lists(states, min_size=n, max_size=n))
    # predictions are mostly copies of the truth so all turn classes show up
    preds = [draw(st.one_of(st.just(g), states)) for g in gts]
    return Conversation.from_states("h", gts, preds)


synth_configs = st.builds(
    SynthConfig,
    seed=st.integers(0, 2**32),
    conversations=st.integers(1, 20),
    turns_per_conversation=st.tuples(st.integers(1, 3), st.integers(3, 9)),
    p_type1=st.floats(0, 0.5),
    p_drop=st.floats(0, 0.5),
    p_spurious=st.floats(0, 0.5),
    p_overwrite=st.floats(0, 0.5),
    p_empty_value=st.floats(0, 0.3),
)


def _check_fga_properties(convs):
    s = evaluate_dataset(convs, MetricConfig(lambdas=LAMBDAS))
    turn_acc = s.m2 / s.n_turns
    assert s.fga[0.0] == s.jga
    assert s.fga[50.0] == pytest.approx(turn_acc, abs=1e-9)
    values = [s.fga[l] for l in LAMBDAS]
    assert values == sorted(values)
    assert all(s.jga <= v <= turn_acc for v in values)


@settings(max_examples=60, deadline=None)
@given(synth_configs)
def test_fga_reduction_limit_monotone_sandwich_synthetic(config):
    _check_fga_properties(generate(config))


@settings(max_examples=200, deadline=None)
@given(st.lists(conversations(), min_size=1, max_size=4))
def test_fga_properties_arbitrary_states(convs):
    _check_fga_properties(convs)


@settings(max_examples=200, deadline=None)
@given(conversations())
def test_exact_implies_local(conv):
    prev_g = prev_p = frozenset()
    for t, turn in enumerate(conv.turns):
        if exact_match(turn.ground_truth, turn.prediction):
            assert local_match(t, turn.ground_truth, turn.prediction, prev_g, prev_p)
        prev_g, prev_p = turn.ground_truth, turn.prediction


@settings(max_examples=200, deadline=None)
@given(conversations(), st.sampled_from(LAMBDAS))
def test_streaming_matches_oracle(conv, lam):
    assert fga_conversation(conv, lam) == oracle_fga(conv, lam)


@settings(max_examples=200, deadline=None)
@given(conversations())
def test_per_conversation_reduction(conv):
    jga = sum(t.ground_truth == t.prediction for t in conv.turns) / len(conv.turns)
    assert fga_conversation(conv, 0.0) == jga


def _slot_oracle(gt, pred, pairs):
    """Fraction of ontology pairs whose value sets agree (single-valued states)."""
    agree = 0
    for d, s in pairs:
        gv = {t.value for t in gt if (t.domain, t.slot) == (d, s)}
        pv = {t.value for t in pred if (t.domain, t.slot) == (d, s)}
        agree += gv == pv
    return agree / len(pairs)


def test_slot_accuracy_matches_per_pair_oracle(synth_corpus):
    ont = synth_ontology(SynthConfig())  # the fixture keeps the default vocabulary
    checked = 0
    for conv in synth_corpus:
        for turn in conv.turns:
            got = slot_accuracy_turn(turn.ground_truth, turn.prediction, ont)
            assert got == pytest.approx(_slot_oracle(turn.ground_truth, turn.prediction, ont.pairs), abs=1e-12)
            checked += 1
    assert checked > 1000


@settings(max_examples=200, deadline=None)
@given(states)
def test_null_prediction_law(gt):
    ont = Ontology(frozenset((d, s) for d in "hr" for s in "abc") | {("x", f"s{i}") for i in range(24)})
    assert slot_accuracy_turn(gt, frozenset(), ont) == (ont.size - len(gt)) / ont.size


@settings(max_examples=300, deadline=None)
@given(states, states, st.frozensets(triplets, min_size=1, max_size=3))
def test_aga_is_blind_to_extra_predictions(gt, pred, extra):
    base = aga_turn(gt, pred)
    more = aga_turn(gt, pred | extra)
    if base is not None:
        assert more >= base


filled = st.builds(Triplet, st.sampled_from(["h", "r"]), st.sampled_from(["a", "b", "c"]),
                  st.sampled_from(["1", "2"]))
outsiders = st.builds(Triplet, st.just("zz"), st.sampled_from(["a", "b", "c"]), st.sampled_from(["1", "2"]))


@settings(max_examples=300, deadline=None)
@given(st.frozensets(filled, min_size=1, max_size=5), states,
       st.frozensets(outsiders, min_size=1, max_size=3))
def test_jaccard_penalizes_extra_predictions(gt, noise, extra):
    pred = gt | noise  # every target hit, so the overlap is positive
    assert aga_turn_jaccard(gt, pred | extra) < aga_turn_jaccard(gt, pred)
    assert aga_turn(gt, pred | extra) == aga_turn(gt, pred)


def test_classes_partition_turns(synth_corpus):
    for conv in synth_corpus:
        classes = classify_turns(conv)
        assert len(classes) == len(conv.turns)
        assert classes[0].kind is not TurnKind.TYPE2

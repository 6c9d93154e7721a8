import pytest

from dst_eval.model import Conversation, Ontology, Triplet
from dst_eval.synth import SynthConfig, generate


def hotel(slot, value):
    return Triplet("hotel", slot, value)


def fig1_conversation(conv_id="fig1"):
    """Six turns realizing the E, E, 1, 2, 1, 2 pattern of the running example.

    Turn 2 misses two hotel slots (|X| = 2, |Y| = 0); turn 4 adds a plausible
    attraction name that the annotation lacks. Turns 3 and 5 get their own
    intents right but inherit the earlier mistakes.
    """
    g0 = {hotel("pricerange", "cheap")}
    g1 = g0 | {hotel("type", "guesthouse")}
    g2 = g1 | {hotel("area", "centre"), hotel("stars", "4")}
    g3 = g2 | {hotel("book day", "friday")}
    g4 = g3 | {Triplet("attraction", "type", "museum")}
    g5 = g4 | {Triplet("taxi", "destination", "museum")}
    p2 = set(g1)
    p3 = p2 | {hotel("book day", "friday")}
    p4 = p3 | {Triplet("attraction", "type", "museum"), Triplet("attraction", "name", "all saints church")}
    p5 = p4 | {Triplet("taxi", "destination", "museum")}
    return Conversation.from_states(conv_id, [g0, g1, g2, g3, g4, g5], [g0, g1, p2, p3, p4, p5])


def aga_conversation(conv_id="aga21"):
    """Three turns with |N_t| = 6, 7, 8 and 4, 5, 7 correctly predicted (16 of 21)."""
    base = [Triplet("hotel", f"s{i}", "v") for i in range(6)]
    g0 = set(base)
    p0 = set(base[:4])
    g1 = g0 | {Triplet("train", "day", "monday")}
    p1 = p0 | {Triplet("train", "day", "monday")}
    g2 = g1 | {Triplet("train", "people", "2")}
    p2 = p1 | {Triplet("train", "people", "2"), base[4]}
    return Conversation.from_states(conv_id, [g0, g1, g2], [p0, p1, p2])


def multiwoz_ontology():
    """The 30 domain-slot pairs of MultiWOZ 2.1."""
    slots = {
        "attraction": ["area", "name", "type"],
        "hotel": ["area", "book day", "book people", "book stay", "internet", "name", "parking",
                  "pricerange", "stars", "type"],
        "restaurant": ["area", "book day", "book people", "book time", "food", "name", "pricerange"],
        "taxi": ["arriveby", "departure", "destination", "leaveat"],
        "train": ["arriveby", "book people", "day", "departure", "destination", "leaveat"],
    }
    return Ontology(frozenset((d, s) for d, ss in slots.items() for s in ss))


@pytest.fixture
def fig1():
    return fig1_conversation()


@pytest.fixture
def aga21():
    return aga_conversation()


@pytest.fixture
def ontology30():
    return multiwoz_ontology()


@pytest.fixture(scope="session")
def synth_corpus():
    return generate(SynthConfig(seed=2024, conversations=300, turns_per_conversation=(1, 10),
                                p_type1=0.15, p_drop=0.1, p_spurious=0.1, p_overwrite=0.2,
                                p_empty_value=0.1))


# one PASS/FAIL line per acceptance criterion in the terminal summary
_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        _acceptance[name] = "PASS" if report.outcome == "passed" else report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_acceptance.items()):
        label = name.replace("test_", "", 1).replace("_", " ")
        terminalreporter.write_line(f"{outcome:<6} {label}")

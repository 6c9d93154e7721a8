"""Prediction/ontology file parsing and report rendering.

Prediction file (JSON, UTF-8)::

    {"version": "1.0",
     "dialogues": [{"dialogue_id": "...",
                    "turns": [{"turn_index": 0,
                               "ground_truth": [["hotel", "area", "centre"]],
                               "prediction": [["hotel", "area", "centre"]],
                               "system_utterance": "", "user_utterance": "..."}]}]}

Ontology file: a JSON list of ``{"domain": ..., "slot": ...}`` records or
``"domain-slot"`` strings.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from . import __version__
from .errors import EmptyField, ParseError, SchemaError
from .metrics import DatasetScores, MetricConfig
from .model import (
    DEFAULT_POLICY,
    Conversation,
    DomainSlot,
    NormalizationPolicy,
    Ontology,
    Turn,
    normalize_triplet,
)
from .tracing import lambda_label

FORMAT_VERSION = "1.0"
REPORT_FORMATS = ("table", "csv", "jsonlines", "markdown")


def _load_json(data):
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc}") from None
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def _require(obj, key, where):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    return obj[key]


def _state(raw, where, policy, warnings):
    if not isinstance(raw, list):
        raise SchemaError(f"{where}: expected a list of triplets")
    out = set()
    for i, trip in enumerate(raw):
        if not (isinstance(trip, list) and len(trip) == 3 and all(isinstance(x, str) for x in trip)):
            raise SchemaError(f"{where}[{i}]: triplet must be a 3-element array of strings")
        try:
            norm = normalize_triplet(trip, policy)
        except EmptyField as exc:
            raise SchemaError(f"{where}[{i}]: {exc}") from None
        if norm in out:
            warnings.append(f"{where}: duplicate triplet {list(norm)} collapsed")
        out.add(norm)
    return frozenset(out)


def parse_predictions(data, policy: NormalizationPolicy = DEFAULT_POLICY,
                      warnings: Optional[List[str]] = None) -> List[Conversation]:
    """Parse a prediction file into conversations.

    Non-fatal findings (duplicate triplets, empty ground-truth states) are
    appended to ``warnings`` when a list is supplied.

    Raises:
        ParseError: the document is not valid JSON.
        SchemaError: a field is missing or turn indices are not 0..N-1.
    """
    warnings = [] if warnings is None else warnings
    doc = _load_json(data)
    version = _require(doc, "version", "document")
    if not isinstance(version, str):
        raise SchemaError("document: 'version' must be a string")
    dialogues = _require(doc, "dialogues", "document")
    if not isinstance(dialogues, list):
        raise SchemaError("document: 'dialogues' must be a list")
    seen = set()
    convs = []
    for d, dial in enumerate(dialogues):
        dial_id = _require(dial, "dialogue_id", f"dialogues[{d}]")
        if not isinstance(dial_id, str):
            raise SchemaError(f"dialogues[{d}]: dialogue_id must be a string")
        if dial_id in seen:
            raise SchemaError(f"dialogue {dial_id!r} appears more than once")
        seen.add(dial_id)
        raw_turns = _require(dial, "turns", f"dialogue {dial_id!r}")
        if not isinstance(raw_turns, list) or not raw_turns:
            raise SchemaError(f"dialogue {dial_id!r}: 'turns' must be a non-empty list")
        turns = []
        for pos, raw in enumerate(raw_turns):
            where = f"dialogue {dial_id!r} turn {pos}"
            index = _require(raw, "turn_index", where)
            if isinstance(index, bool) or not isinstance(index, int) or index != pos:
                raise SchemaError(
                    f"dialogue {dial_id!r}: turn indices must run 0..N-1 contiguously, "
                    f"found {index!r} at position {pos}"
                )
            gt = _state(_require(raw, "ground_truth", where), f"{where} ground_truth", policy, warnings)
            pred = _state(_require(raw, "prediction", where), f"{where} prediction", policy, warnings)
            if not gt:
                warnings.append(f"{where}: empty ground-truth state")
            utter = None
            if "system_utterance" in raw or "user_utterance" in raw:
                utter = (str(raw.get("system_utterance", "")), str(raw.get("user_utterance", "")))
            turns.append(Turn(index, gt, pred, utter))
        convs.append(Conversation(dial_id, tuple(turns)))
    return convs


def _sorted_state(state):
    return [list(t) for t in sorted(state)]


def dump_predictions(conversations: Sequence[Conversation]) -> bytes:
    """Serialize conversations to the prediction-file format (deterministic)."""
    dialogues = []
    for conv in conversations:
        turns = []
        for turn in conv.turns:
            rec = {
                "turn_index": turn.turn_index,
                "ground_truth": _sorted_state(turn.ground_truth),
                "prediction": _sorted_state(turn.prediction),
            }
            if turn.utterances is not None:
                rec["system_utterance"], rec["user_utterance"] = turn.utterances
            turns.append(rec)
        dialogues.append({"dialogue_id": conv.id, "turns": turns})
    doc = {"version": FORMAT_VERSION, "dialogues": dialogues}
    return (json.dumps(doc, ensure_ascii=False, indent=1) + "\n").encode("utf-8")


def parse_ontology(data, policy: NormalizationPolicy = DEFAULT_POLICY) -> Ontology:
    doc = _load_json(data)
    if isinstance(doc, dict) and "pairs" in doc:
        doc = doc["pairs"]
    if not isinstance(doc, list):
        raise SchemaError("ontology: expected a list of domain-slot pairs")
    pairs = set()
    for i, item in enumerate(doc):
        if isinstance(item, str):
            domain, sep, slot = item.partition("-")
            if not sep:
                raise SchemaError(f"ontology[{i}]: {item!r} is not a 'domain-slot' string")
        elif isinstance(item, dict):
            domain, slot = _require(item, "domain", f"ontology[{i}]"), _require(item, "slot", f"ontology[{i}]")
        else:
            raise SchemaError(f"ontology[{i}]: expected a string or an object")
        domain, slot = policy.token(str(domain)), policy.token(str(slot))
        if not domain or not slot:
            raise SchemaError(f"ontology[{i}]: empty domain or slot")
        pairs.add(DomainSlot(domain, slot))
    if not pairs:
        raise SchemaError("ontology: the pair list is empty")
    return Ontology(frozenset(pairs))


def dump_ontology(ontology: Ontology) -> bytes:
    records = [{"domain": d, "slot": s} for d, s in sorted(ontology.pairs)]
    return (json.dumps(records, indent=1) + "\n").encode("utf-8")


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class ReportRow:
    model_name: str
    n_turns: int
    m1: int
    m2: int
    jga: float
    sa: Optional[float]
    aga: Optional[float]
    aga_jaccard: Optional[float]
    fga: Dict[float, float]
    ignored_turns: int

    def __post_init__(self):
        if self.n_turns < 1 or not 0 <= self.m1 <= self.m2 <= self.n_turns:
            raise ValueError(f"inconsistent counts for {self.model_name!r}: "
                             f"n_turns={self.n_turns}, m1={self.m1}, m2={self.m2}")
        if self.jga != self.m1 / self.n_turns:
            raise ValueError(f"jga for {self.model_name!r} does not equal m1/n_turns")

    @classmethod
    def from_scores(cls, name: str, scores: DatasetScores) -> "ReportRow":
        return cls(name, scores.n_turns, scores.m1, scores.m2, scores.jga, scores.sa,
                   scores.aga, scores.aga_jaccard, dict(scores.fga), scores.ignored_turns)


@dataclass(frozen=True)
class MetricReport:
    rows: List[ReportRow]
    lambdas: List[float]
    provenance: Dict[str, object] = field(default_factory=dict)


def config_echo(config: MetricConfig) -> dict:
    return {
        "lambdas": [lambda_label(l) for l in config.lambdas],
        "lowercase": config.policy.lowercase,
        "trim_whitespace": config.policy.trim_whitespace,
        "empty_values": sorted(config.policy.empty_values),
        "ontology_size": config.ontology.size if config.ontology is not None else None,
    }


def build_report(named_scores, config: MetricConfig, digests: Optional[Dict[str, str]] = None) -> MetricReport:
    """Assemble a report from ``[(model_name, DatasetScores), ...]`` in the given order."""
    rows = [ReportRow.from_scores(name, scores) for name, scores in named_scores]
    provenance = {
        "tool": "dst_eval",
        "tool_version": __version__,
        "config": config_echo(config),
        "inputs": dict(digests or {}),
    }
    return MetricReport(rows, list(config.lambdas), provenance)


def _columns(lambdas):
    return (["model", "n_turns", "m1", "m2", "jga", "sa", "aga", "aga_jaccard"]
            + [f"fga_{lambda_label(l)}" for l in lambdas] + ["ignored_turns"])


def _row_values(row: ReportRow, lambdas):
    return ([row.model_name, row.n_turns, row.m1, row.m2, row.jga, row.sa, row.aga, row.aga_jaccard]
            + [row.fga[l] for l in lambdas] + [row.ignored_turns])


def _pct(value):
    return "n/a" if value is None else f"{100 * value:.2f}%"


def _display_cells(report: MetricReport):
    header = (["Model", "#Turns", "#M1", "#M2", "JGA", "SA", "AGA", "AGA-J"]
              + [f"FGA_{lambda_label(l)}" for l in report.lambdas] + ["Ignored"])
    body = []
    for row in report.rows:
        body.append(
            [row.model_name, str(row.n_turns), str(row.m1), str(row.m2), _pct(row.jga), _pct(row.sa),
             _pct(row.aga), _pct(row.aga_jaccard)]
            + [_pct(row.fga[l]) for l in report.lambdas] + [str(row.ignored_turns)]
        )
    return header, body


def _render_table(report):
    header, body = _display_cells(report)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        return "  ".join([first] + [c.rjust(w) for c, w in zip(cells[1:], widths[1:])])

    rule = "-" * len(line(header))
    return "\n".join([rule, line(header), rule] + [line(r) for r in body] + [rule]) + "\n"


def _render_markdown(report):
    header, body = _display_cells(report)
    out = ["| " + " | ".join(header) + " |",
           "|" + "|".join([":---"] + ["---:"] * (len(header) - 1)) + "|"]
    out += ["| " + " | ".join(r) + " |" for r in body]
    return "\n".join(out) + "\n"


def _render_csv(report):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_columns(report.lambdas))
    for row in report.rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v
                         for v in _row_values(row, report.lambdas)])
    return buf.getvalue()


def _render_jsonlines(report):
    lines = []
    cols = _columns(report.lambdas)
    for row in report.rows:
        lines.append(json.dumps(dict(zip(cols, _row_values(row, report.lambdas)))))
    lines.append(json.dumps({"provenance": report.provenance}, sort_keys=True))
    return "\n".join(lines) + "\n"


_RENDERERS = {
    "table": _render_table,
    "csv": _render_csv,
    "jsonlines": _render_jsonlines,
    "markdown": _render_markdown,
}


def render_report(report: MetricReport, format: str = "table") -> bytes:
    """Render ``report``; table and markdown show percentages, csv/jsonlines full precision."""
    try:
        renderer = _RENDERERS[format]
    except KeyError:
        raise ValueError(f"unknown report format {format!r}; choose from {REPORT_FORMATS}") from None
    return renderer(report).encode("utf-8")


def parse_report_csv(data: bytes) -> List[dict]:
    """Read a csv report back into dicts of numbers (None for unavailable cells)."""
    reader = csv.DictReader(_io.StringIO(data.decode("utf-8")))
    rows = []
    for rec in reader:
        parsed = {}
        for key, value in rec.items():
            if key == "model":
                parsed[key] = value
            elif value == "":
                parsed[key] = None
            elif key in ("n_turns", "m1", "m2", "ignored_turns"):
                parsed[key] = int(value)
            else:
                parsed[key] = float(value)
        rows.append(parsed)
    return rows

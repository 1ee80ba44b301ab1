"""Ordinal plausibility levels, implication consistency and odds updating.

Levels are ordered but carry no numbers; consistency of an implication
``A -> B`` only asks that B is at least as plausible as A, plus the endpoint
rules of modus ponens (A true forces B true) and modus tollens (B false
forces A false).
"""
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple


class Plausibility(enum.IntEnum):
    FALSE = 0
    VERY_IMPLAUSIBLE = 1
    IMPLAUSIBLE = 2
    FIFTY_FIFTY = 3
    PLAUSIBLE = 4
    VERY_PLAUSIBLE = 5
    TRUE = 6

    @property
    def token(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def parse(cls, token: str) -> "Plausibility":
        try:
            return cls[token.strip().upper().replace("-", "_")]
        except (KeyError, AttributeError):
            raise ValueError(f"unknown plausibility level {token!r}") from None


@dataclass(frozen=True)
class Proposition:
    id: str
    statement: str
    level: Plausibility


@dataclass(frozen=True)
class ImplicationGraph:
    nodes: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]

    def __post_init__(self):
        known = set(self.nodes)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"implication {a} -> {b} references an unknown proposition")
        if self.has_cycle():
            raise ValueError("implication graph contains a cycle")

    def has_cycle(self) -> bool:
        succ: Dict[str, List[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            succ[a].append(b)
        state: Dict[str, int] = {}

        def visit(n: str) -> bool:
            state[n] = 1
            for m in succ[n]:
                if state.get(m) == 1 or (m not in state and visit(m)):
                    return True
            state[n] = 2
            return False

        return any(n not in state and visit(n) for n in self.nodes)


@dataclass(frozen=True)
class Violation:
    antecedent: str
    consequent: str
    reason: str

    def __str__(self) -> str:
        return f"{self.antecedent} -> {self.consequent}: {self.reason}"


def check_consistency(graph: ImplicationGraph, propositions: Iterable[Proposition]) -> List[Violation]:
    levels = {p.id: p.level for p in propositions}
    violations = []
    for a, b in graph.edges:
        if a not in levels or b not in levels:
            raise ValueError(f"implication {a} -> {b} references an unknown proposition")
        la, lb = levels[a], levels[b]
        if la > lb:
            reason = f"{la.token} antecedent but {lb.token} consequent"
        elif la == Plausibility.TRUE and lb != Plausibility.TRUE:
            reason = "true antecedent forces a true consequent"
        elif lb == Plausibility.FALSE and la != Plausibility.FALSE:
            reason = "false consequent forces a false antecedent"
        else:
            continue
        violations.append(Violation(a, b, reason))
    return violations


@dataclass(frozen=True)
class OddsState:
    prior_odds: float
    threshold: float
    likelihood_ratios: Tuple[Tuple[float, str], ...] = ()
    posterior_odds: float = field(default=math.nan)

    def __post_init__(self):
        if not self.prior_odds > 0:
            raise ValueError("prior odds must be positive")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        for lr, _ in self.likelihood_ratios:
            if not lr > 0:
                raise ValueError("likelihood ratios must be positive")
        if math.isnan(self.posterior_odds):
            post = self.prior_odds * math.prod(lr for lr, _ in self.likelihood_ratios)
            object.__setattr__(self, "posterior_odds", post)


def update_odds(state: OddsState, lr: float, label: str = "") -> OddsState:
    if not lr > 0:
        raise ValueError(f"likelihood ratio must be positive, got {lr!r}")
    return OddsState(state.prior_odds, state.threshold, state.likelihood_ratios + ((lr, label),),
                     state.posterior_odds * lr)


def decide_threshold(state: OddsState) -> bool:
    # inclusive: odds exactly at the threshold count as reaching it
    return state.posterior_odds >= state.threshold


@dataclass(frozen=True)
class PromiseRecord:
    promiser: str
    promisee: str
    body: str
    assessment: Plausibility

    def __post_init__(self):
        if not self.promiser.strip() or not self.promisee.strip():
            raise ValueError("promiser and promisee must be named")


@dataclass(frozen=True)
class CaseFile:
    propositions: Tuple[Proposition, ...]
    graph: ImplicationGraph
    promises: Tuple[PromiseRecord, ...] = ()
    odds: Optional[OddsState] = None


@dataclass(frozen=True)
class CaseReport:
    violations: Tuple[Violation, ...]
    odds: Optional[OddsState]

    @property
    def consistent(self) -> bool:
        return not self.violations

    @property
    def decision(self) -> Optional[bool]:
        return None if self.odds is None else decide_threshold(self.odds)


class CaseError(ValueError):
    pass


_CASE_KEYS = {"propositions", "implications", "promises", "odds"}


def parse_case(doc: Mapping[str, Any]) -> CaseFile:
    if not isinstance(doc, dict):
        raise CaseError("case file must be a JSON object")
    unknown = set(doc) - _CASE_KEYS
    if unknown:
        raise CaseError(f"unknown keys: {sorted(unknown)}")
    try:
        props = tuple(Proposition(str(p["id"]), str(p.get("statement", "")), Plausibility.parse(p["level"]))
                      for p in doc.get("propositions", []))
        ids = [p.id for p in props]
        if len(set(ids)) != len(ids):
            raise CaseError("duplicate proposition id")
        edges = tuple((str(a), str(b)) for a, b in doc.get("implications", []))
        graph = ImplicationGraph(tuple(ids), edges)
        promises = tuple(PromiseRecord(p["promiser"], p["promisee"], p.get("body", ""),
                                       Plausibility.parse(p["assessment"]))
                         for p in doc.get("promises", []))
        odds = None
        if "odds" in doc:
            o = doc["odds"]
            odds = OddsState(float(o["prior"]), float(o["threshold"]))
            for factor in o.get("factors", []):
                odds = update_odds(odds, float(factor["lr"]), str(factor.get("label", "")))
    except CaseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseError(f"malformed case file: {exc}") from None
    return CaseFile(props, graph, promises, odds)


def load_case(path) -> CaseFile:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CaseError(f"invalid JSON: {exc}") from None
    return parse_case(doc)


def reason(case: CaseFile) -> CaseReport:
    return CaseReport(tuple(check_consistency(case.graph, case.propositions)), case.odds)


def case_to_dict(case: CaseFile) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "propositions": [{"id": p.id, "statement": p.statement, "level": p.level.token} for p in case.propositions],
        "implications": [list(e) for e in case.graph.edges],
        "promises": [{"promiser": p.promiser, "promisee": p.promisee, "body": p.body,
                      "assessment": p.assessment.token} for p in case.promises],
    }
    if case.odds is not None:
        doc["odds"] = {"prior": case.odds.prior_odds, "threshold": case.odds.threshold,
                       "factors": [{"lr": lr, "label": label} for lr, label in case.odds.likelihood_ratios]}
    return doc

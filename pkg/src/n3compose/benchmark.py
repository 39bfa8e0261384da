"""Deterministic generator of composable description chains and a timing
harness separating parse, reason, and total phases.

A chain of length n consists of descriptions desc1..descN. Description i
consumes a path of d rel_i links, describes a GET request to the path's
endpoint, and promises a path of d rel_{i+1} links starting there. Only
the endpoint of the initial facts is ground, so each pre-proof contains
exactly one sufficiently specified request (the chain head) and exactly
n description applications.

Dummies are structurally identical chains over a disjoint predicate
family; they can compose among themselves but can never reach the goal
predicate.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

from . import n3, reason
from .n3 import Document, ExistentialVar, Formula, GraphTerm, Implication, Literal, Triple, UniversalVar, Uri
from .reason import Budget, FilterRule, KnowledgeBase

CHAIN_NS = "http://example.org/chain#"
HTTP_NS = "http://www.w3.org/2011/http#"

PREFIXES = {"ex": CHAIN_NS, "http": HTTP_NS}


@dataclass(frozen=True)
class ChainSpec:
    n: int
    d: int = 1
    dummies: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("chain length n must be at least 2")
        if self.d < 1:
            raise ValueError("dependency count d must be at least 1")
        if self.dummies < 0:
            raise ValueError("dummy count must be nonnegative")


@dataclass
class ChainBundle:
    spec: ChainSpec
    descriptions: List[Tuple[str, Document]]     # real chain, then dummies
    initial: Document                            # ground facts H
    goal: FilterRule
    plan: List[str]                              # rule IRIs in execution order
    link_table: Dict[str, str]                   # GET target -> response N3 body

    def rule_iris(self) -> List[str]:
        return [iri for iri, _ in self.descriptions]


def _node(spec: ChainSpec, family: str, level: int, idx: int) -> Uri:
    return Uri(f"http://example.org/chain/{spec.seed}/{family or 'main'}/n{level}_{idx}")


def _rel(family: str, level: int) -> Uri:
    return Uri(CHAIN_NS + f"{family}rel{level}")


def _description(spec: ChainSpec, family: str, level: int) -> Document:
    """{ d-link rel_i path } => { GET to the path endpoint; d-link
    rel_{i+1} path from the endpoint }."""
    d = spec.d
    vs = [UniversalVar(f"v{j}") for j in range(d + 1)]
    body = Formula([Triple(vs[j], _rel(family, level), vs[j + 1]) for j in range(d)])
    req = ExistentialVar("request")
    resp = ExistentialVar("response")
    ws = [ExistentialVar(f"w{j}") for j in range(1, d + 1)]
    nxt = _rel(family, level + 1)
    head_atoms = [
        Triple(req, Uri(HTTP_NS + "methodName"), Literal("GET")),
        Triple(req, Uri(HTTP_NS + "requestURI"), vs[d]),
        Triple(req, Uri(HTTP_NS + "resp"), resp),
        Triple(resp, Uri(HTTP_NS + "body"), vs[d]),
    ]
    chain_nodes = [vs[d]] + ws
    head_atoms += [Triple(chain_nodes[j], nxt, chain_nodes[j + 1]) for j in range(d)]
    imp = Implication(GraphTerm(body), GraphTerm(Formula(head_atoms)))
    return Document(prefixes=dict(PREFIXES), body=Formula((), (imp,)))


def _facts(spec: ChainSpec, family: str) -> List[Triple]:
    nodes = [_node(spec, family, 1, j) for j in range(spec.d + 1)]
    rel = _rel(family, 1)
    return [Triple(nodes[j], rel, nodes[j + 1]) for j in range(spec.d)]


def _response_body(spec: ChainSpec, family: str, level: int, start: Uri) -> str:
    """Ground rel_{level} path of d links starting at `start`."""
    nodes = [start] + [_node(spec, family, level, j) for j in range(1, spec.d + 1)]
    rel = _rel(family, level)
    formula = Formula([Triple(nodes[j], rel, nodes[j + 1]) for j in range(spec.d)])
    return n3.serialize(Document(prefixes=dict(PREFIXES), body=formula))


def generate_chain(spec: ChainSpec) -> ChainBundle:
    descriptions: List[Tuple[str, Document]] = []
    plan: List[str] = []
    for i in range(1, spec.n + 1):
        iri = f"desc{i}"
        descriptions.append((iri, _description(spec, "", i)))
        plan.append(iri)

    facts = _facts(spec, "")
    link_table: Dict[str, str] = {}
    endpoint = _node(spec, "", 1, spec.d)
    for i in range(1, spec.n + 1):
        body = _response_body(spec, "", i + 1, endpoint)
        link_table[endpoint.value] = body
        endpoint = _node(spec, "", i + 1, spec.d)

    # dummies: same chain shape over per-family predicates, own seed facts
    family = 0
    remaining = spec.dummies
    while remaining > 0:
        family += 1
        length = min(spec.n, remaining)
        fam = f"dummy{family}_"
        for i in range(1, length + 1):
            descriptions.append((f"{fam}desc{i}", _description(spec, fam, i)))
        facts.extend(_facts(spec, fam))
        remaining -= length

    initial = Document(prefixes=dict(PREFIXES), body=Formula(facts))

    d = spec.d
    goal_vars = [UniversalVar(f"v{j}") for j in range(d + 1)]
    goal_rel = _rel("", spec.n + 1)
    goal_formula = Formula([Triple(goal_vars[j], goal_rel, goal_vars[j + 1]) for j in range(d)])
    goal_imp = Implication(GraphTerm(goal_formula), GraphTerm(goal_formula))
    goal_doc = Document(prefixes=dict(PREFIXES), body=Formula((), (goal_imp,)))
    goal = FilterRule.from_document("goal", goal_doc)

    return ChainBundle(spec=spec, descriptions=descriptions, initial=initial,
                       goal=goal, plan=plan, link_table=link_table)


def write_chain(bundle: ChainBundle, out_dir) -> List[str]:
    """Serialize the bundle into a directory; byte-identical per spec+seed."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, doc in [("initial", bundle.initial), ("goal", bundle.goal.document)] \
            + [(iri, doc) for iri, doc in bundle.descriptions]:
        path = os.path.join(out_dir, f"{name}.n3")
        with open(path, "w") as fh:
            fh.write(n3.serialize(doc))
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Timing harness
# ---------------------------------------------------------------------------

@dataclass
class TimingRecord:
    spec: ChainSpec
    trial: int
    parse_s: float
    reason_s: float
    n_pre: Optional[int]           # None when the trial failed
    error: str = ""

    @property
    def total_s(self) -> float:
        return self.parse_s + self.reason_s


CSV_COLUMNS = ["n", "d", "dummies", "trial", "parse_ms", "reason_ms", "total_ms", "n_pre"]


def run_benchmark(grid: Sequence[ChainSpec], trials: int,
                  budget: Budget = Budget(max_steps=1_000_000, max_seconds=300.0)) -> List[TimingRecord]:
    """Per spec: a discarded warm-up trial, then `trials` measured trials.
    The parse phase re-reads the serialized inputs; parse + reasoning
    make up the total."""
    if trials < 1:
        raise ValueError("need at least one trial")
    records: List[TimingRecord] = []
    for spec in grid:
        bundle = generate_chain(spec)
        texts = [("initial", n3.serialize(bundle.initial)),
                 ("goal", n3.serialize(bundle.goal.document))]
        texts += [(iri, n3.serialize(doc)) for iri, doc in bundle.descriptions]
        for trial in range(-1, trials):
            record = _run_trial(spec, texts, budget, trial)
            if trial >= 0:
                records.append(record)
    return records


def _run_trial(spec: ChainSpec, texts: List[Tuple[str, str]],
               budget: Budget, trial: int) -> TimingRecord:
    t0 = time.monotonic()
    docs = {iri: n3.parse_document(text) for iri, text in texts}
    parse_s = time.monotonic() - t0

    kb = KnowledgeBase()
    kb.add_source("initial", docs["initial"])
    goal = FilterRule.from_document("goal", docs["goal"])
    rule_sources = [(iri, doc) for iri, doc in docs.items() if iri not in ("initial", "goal")]

    t1 = time.monotonic()
    try:
        proof = reason.prove(kb, rule_sources, goal, budget)
        n_pre = reason.count_rule_applications(proof, [iri for iri, _ in rule_sources])
        error = ""
    except (reason.Unprovable, reason.BudgetExceeded) as exc:
        n_pre = None
        error = f"{type(exc).__name__}: {exc}"
    reason_s = time.monotonic() - t1
    return TimingRecord(spec=spec, trial=trial, parse_s=parse_s,
                        reason_s=reason_s, n_pre=n_pre, error=error)


def write_csv(records: Sequence[TimingRecord], fh: TextIO) -> None:
    writer = csv.writer(fh)
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([r.spec.n, r.spec.d, r.spec.dummies, r.trial,
                         f"{r.parse_s * 1000:.3f}", f"{r.reason_s * 1000:.3f}",
                         f"{r.total_s * 1000:.3f}",
                         "" if r.n_pre is None else r.n_pre])


def read_csv(fh: TextIO) -> List[dict]:
    return [dict(row) for row in csv.DictReader(fh)]

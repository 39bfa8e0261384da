"""The pragmatic proof loop: prove, pick the one executable request,
execute it, fold the response into the state, re-prove, and either adopt
the shorter proof or retire the rule whose promise did not hold.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from . import n3, reason, restdesc
from .n3 import Document, ExistentialVar, Formula, UniversalVar
from .reason import Budget, FilterRule, KnowledgeBase, Proof
from .restdesc import ExtractedRequest, RestDescription, WireRequest
from .simulator import WireResponse

log = logging.getLogger(__name__)

TRACE_NS = "http://example.org/composition#"


class CompositionError(Exception):
    pass


class NoneSelectable(CompositionError):
    """No sufficiently specified request in a proof with applications;
    the theory guarantees one exists, so this flags an engine bug."""


class Transport(Protocol):
    def send(self, req: WireRequest) -> WireResponse: ...


@dataclass
class CompositionProblem:
    """The tuple (H, g, R, B), validated on construction."""

    initial: List[Tuple[str, Document]]        # H: ground facts
    goal: FilterRule                           # g as a filter rule
    rules: List[RestDescription]               # R
    background: List[Tuple[str, Document]] = field(default_factory=list)   # B

    def __post_init__(self):
        for iri, doc in self.initial:
            if not n3.is_ground(Formula(doc.body.atoms)):
                raise CompositionError(f"initial state {iri!r} is not ground")
            if doc.body.implications:
                raise CompositionError(f"initial state {iri!r} contains rules")
        for iri, doc in self.background:
            if not n3.is_ground(Formula(doc.body.atoms)):
                raise CompositionError(f"background facts in {iri!r} are not ground")
            for imp in doc.body.implications:
                if not isinstance(imp.antecedent, n3.GraphTerm) \
                        or not isinstance(imp.consequent, n3.GraphTerm):
                    raise CompositionError(f"background rule in {iri!r} is malformed")
                body_vars = set(n3.variables_in_order(imp.antecedent.formula))
                for var in n3.variables_in_order(imp.consequent.formula):
                    if isinstance(var, ExistentialVar):
                        raise CompositionError(
                            f"background rule in {iri!r} introduces existentials")
                    if var not in body_vars:
                        raise CompositionError(
                            f"background rule in {iri!r} has unbound head universal {var!r}")
        seen = set()
        for r in self.rules:
            if r.source in seen:
                raise CompositionError(f"duplicate description source {r.source!r}")
            seen.add(r.source)


@dataclass
class ExecutedStep:
    n_pre: int
    request: WireRequest
    rule_source: str
    response_status: int
    g: Formula
    n_post: int
    decision: str            # "advance" | "retire"
    warnings: List[str] = field(default_factory=list)


@dataclass
class ExecutionOutcome:
    status: str              # "success" | "failure"
    goal_instance: Optional[Formula]
    trace: List[ExecutedStep]
    retired: List[str]
    cause: str = ""
    final_proof: Optional[Proof] = None

    @property
    def success(self) -> bool:
        return self.status == "success"


def select_request(pre_proof: Proof, rules: Sequence[RestDescription]) -> ExtractedRequest:
    """First sufficiently specified request in dependency order."""
    for extracted in restdesc.extract_requests(pre_proof, rules):
        if extracted.sufficiently_specified:
            return extracted
    raise NoneSelectable("no sufficiently specified request in the pre-proof")


def incorporate_response(h: Formula, resp: WireResponse,
                         warnings: Optional[List[str]] = None) -> Formula:
    """Ground triples of the response body; everything else is dropped
    with a warning, malformed or error responses yield an empty result."""
    sink = warnings if warnings is not None else []
    if not resp.ok:
        sink.append(f"non-success status {resp.status}; response ignored")
        return Formula()
    if not resp.body.strip():
        return Formula()
    try:
        doc = n3.parse_document(resp.body)
    except n3.ParseError as exc:
        sink.append(f"unparseable response body: {exc}")
        return Formula()
    kept = []
    for atom in doc.body.atoms:
        if n3.term_is_ground(atom.subject) and n3.term_is_ground(atom.predicate) \
                and n3.term_is_ground(atom.object):
            kept.append(atom)
        else:
            sink.append(f"dropped non-ground response triple {atom!r}")
    if doc.body.implications:
        sink.append("dropped response rules; only ground triples are incorporated")
    for warning in sink:
        log.warning("%s", warning)
    return Formula(kept)


def _exchange_record(request, index: int) -> Formula:
    """The performed request group as ground facts; leftover placeholders
    (request and response nodes, unfulfilled promises) get fresh exchange
    URIs. Recording the exchange lets the reasoner recognise an already
    executed description as fulfilled instead of re-deriving its promise."""
    mapping: Dict[n3.Term, n3.Term] = {}
    for t in request.triples:
        for term in t.terms():
            if isinstance(term, ExistentialVar) and term not in mapping:
                mapping[term] = n3.Uri(f"{TRACE_NS}exchange{index}-{term.name}")
    sub = n3.Substitution(mapping)
    return n3.apply_substitution(Formula(list(request.triples)), sub, mode="total")


def run(problem: CompositionProblem, transport: Transport,
        budget: Budget = Budget(), keep_learned: bool = False) -> ExecutionOutcome:
    """The seven-step loop. On retirement the state reverts to the
    original H (the definition's letter); keep_learned retains observed
    ground facts across retirements instead."""
    active = list(problem.rules)
    retired: List[str] = []
    trace: List[ExecutedStep] = []
    learned: List[Tuple[str, Document]] = []
    response_count = 0
    iteration_cap: Optional[int] = None
    iterations = 0

    def prove_with(extra: Sequence[Tuple[str, Document]]) -> Proof:
        kb = KnowledgeBase()
        for iri, doc in list(problem.initial) + list(problem.background) + list(extra):
            kb.add_source(iri, doc)
        return reason.prove(kb, [(r.source, r.document) for r in active],
                            problem.goal, budget)

    def applications(proof: Proof) -> int:
        return reason.count_rule_applications(proof, [r.source for r in active])

    # Step 1: initial pre-proof
    try:
        pre_proof = prove_with(learned)
    except reason.Unprovable as exc:
        return ExecutionOutcome("failure", None, trace, retired, cause=str(exc))
    except reason.BudgetExceeded as exc:
        return ExecutionOutcome("failure", None, trace, retired,
                                cause=f"budget exceeded: {exc}")
    n_pre = applications(pre_proof)

    while True:
        iterations += 1
        if iteration_cap is None:
            iteration_cap = (len(problem.rules) + 1) * (n_pre + 1)
        assert iterations <= iteration_cap, "termination bound exceeded"

        # Step 2
        if n_pre == 0:
            goal_instance = pre_proof.steps[pre_proof.root].gives
            assert n3.is_ground(goal_instance), "success instance must be ground"
            return ExecutionOutcome("success", goal_instance, trace, retired,
                                    final_proof=pre_proof)

        # Step 3
        selected = select_request(pre_proof, active)
        wire = restdesc.to_wire_request(selected.request)

        # Step 4
        response = transport.send(wire)
        warnings: List[str] = []
        g = incorporate_response(Formula(), response, warnings)
        response_count += 1
        g_source = (f"response{response_count}",
                    Document(prefixes={}, body=g))
        exchange_source = (f"exchange{response_count}",
                           Document(prefixes={}, body=_exchange_record(
                               selected.request, response_count)))

        # Step 5
        post_proof: Optional[Proof] = None
        try:
            post_proof = prove_with(learned + [g_source, exchange_source])
            n_post = applications(post_proof)
        except (reason.Unprovable, reason.BudgetExceeded):
            n_post = n_pre           # Step 6a

        # Step 7
        if n_post >= n_pre:
            rule = next(r for r in active if r.source == selected.rule_source)
            active.remove(rule)
            retired.append(rule.source)
            trace.append(ExecutedStep(n_pre, wire, selected.rule_source,
                                      response.status, g, n_post, "retire", warnings))
            if keep_learned:
                learned = learned + [g_source]
            else:
                learned = []         # restart from the original H
            try:
                pre_proof = prove_with(learned)
            except reason.Unprovable as exc:
                return ExecutionOutcome("failure", None, trace, retired, cause=str(exc))
            except reason.BudgetExceeded as exc:
                return ExecutionOutcome("failure", None, trace, retired,
                                        cause=f"budget exceeded: {exc}")
            n_pre = applications(pre_proof)
        else:
            trace.append(ExecutedStep(n_pre, wire, selected.rule_source,
                                      response.status, g, n_post, "advance", warnings))
            learned = learned + [g_source, exchange_source]
            pre_proof = post_proof
            n_pre = n_post


def trace_document(outcome: ExecutionOutcome) -> Document:
    """The executed steps as an N3 document for the --trace output."""
    c = TRACE_NS
    atoms = []
    run_node = n3.Uri("#run")
    atoms.append(n3.Triple(run_node, n3.Uri(c + "status"), n3.Literal(outcome.status)))
    for i, step in enumerate(outcome.trace, start=1):
        node = n3.Uri(f"#step{i}")
        atoms += [
            n3.Triple(run_node, n3.Uri(c + "step"), node),
            n3.Triple(node, n3.Uri(c + "index"), n3.Literal(str(i), n3.XSD_INTEGER)),
            n3.Triple(node, n3.Uri(c + "nPre"), n3.Literal(str(step.n_pre), n3.XSD_INTEGER)),
            n3.Triple(node, n3.Uri(c + "method"), n3.Literal(step.request.method)),
            n3.Triple(node, n3.Uri(c + "target"), n3.Literal(step.request.target)),
            n3.Triple(node, n3.Uri(c + "rule"), n3.Uri(step.rule_source)),
            n3.Triple(node, n3.Uri(c + "status"), n3.Literal(str(step.response_status), n3.XSD_INTEGER)),
            n3.Triple(node, n3.Uri(c + "nPost"), n3.Literal(str(step.n_post), n3.XSD_INTEGER)),
            n3.Triple(node, n3.Uri(c + "decision"), n3.Literal(step.decision)),
        ]
    if outcome.goal_instance is not None:
        atoms.append(n3.Triple(run_node, n3.Uri(c + "gives"),
                               n3.GraphTerm(outcome.goal_instance)))
    return Document(prefixes={"c": c}, body=Formula(atoms))

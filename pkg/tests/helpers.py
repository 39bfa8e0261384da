"""Shared test utilities: fixture loading, an independent brute-force
forward-closure oracle, and the proof-mutation machinery for the checker
suite. The oracle deliberately shares no code with the engine under
test."""

import copy
import os
import random
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from n3compose import n3, reason, restdesc
from n3compose.n3 import (
    Document, ExistentialVar, Formula, GraphTerm, Implication, Literal,
    Triple, UniversalVar, Uri,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def load_doc(name: str) -> Document:
    with open(fixture_path(name + ".n3")) as fh:
        return n3.parse_document(fh.read())


def image_setup():
    """Knowledge base, rule sources, descriptions, and goal of the image
    scenario."""
    kb = reason.KnowledgeBase()
    kb.add_source("agent_knowledge", load_doc("agent_knowledge"))
    rule_sources = [("desc_images", load_doc("desc_images")),
                    ("desc_thumbnail", load_doc("desc_thumbnail"))]
    goal = reason.FilterRule.from_document("agent_goal", load_doc("agent_goal"))
    descriptions = [restdesc.validate_description(doc, iri) for iri, doc in rule_sources]
    return kb, rule_sources, descriptions, goal


def image_sources() -> Dict[str, Document]:
    return {name: load_doc(name) for name in
            ("agent_knowledge", "desc_images", "desc_thumbnail", "agent_goal")}


def image_proof() -> reason.Proof:
    kb, rule_sources, _, goal = image_setup()
    return reason.prove(kb, rule_sources, goal)


# ---------------------------------------------------------------------------
# Brute-force forward-closure oracle over plain tuples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleInstance:
    facts: List[Tuple[str, str, str]]              # constants only
    rules: List[Tuple[List[tuple], List[tuple]]]   # (body, head); vars as ("?", name)
    goal: List[tuple]                              # conjunctive pattern


def oracle_closure(instance: OracleInstance) -> Set[Tuple[str, str, str]]:
    facts = set(instance.facts)
    changed = True
    while changed:
        changed = False
        snapshot = frozenset(facts)
        for body, head in instance.rules:
            for theta in _oracle_matches(body, snapshot, {}):
                for atom in head:
                    grounded = tuple(theta.get(t, t) if isinstance(t, tuple) else t
                                     for t in atom)
                    if grounded not in facts:
                        facts.add(grounded)
                        changed = True
    return facts


def _oracle_matches(patterns, facts, theta) -> Iterator[dict]:
    if not patterns:
        yield theta
        return
    first, rest = patterns[0], patterns[1:]
    for fact in facts:
        attempt = dict(theta)
        ok = True
        for p, v in zip(first, fact):
            if isinstance(p, tuple):
                if attempt.setdefault(p, v) != v:
                    ok = False
                    break
            elif p != v:
                ok = False
                break
        if ok:
            yield from _oracle_matches(rest, facts, attempt)


def oracle_derivable(instance: OracleInstance) -> bool:
    closure = oracle_closure(instance)
    return next(_oracle_matches(instance.goal, closure, {}), None) is not None


def random_instance(rng: random.Random) -> OracleInstance:
    constants = [f"http://example.org/o#c{i}" for i in range(4)]
    predicates = [f"http://example.org/o#p{i}" for i in range(3)]

    def const():
        return rng.choice(constants)

    def pred():
        return rng.choice(predicates)

    facts = [(const(), pred(), const()) for _ in range(rng.randint(1, 8))]

    rules = []
    for _ in range(rng.randint(0, 4)):
        variables = [("?", f"v{i}") for i in range(rng.randint(1, 3))]

        def var_or_const():
            return rng.choice(variables) if rng.random() < 0.6 else const()

        body = [(var_or_const(), pred(), var_or_const())
                for _ in range(rng.randint(1, 2))]
        body_vars = [t for atom in body for t in atom if isinstance(t, tuple)]
        if not body_vars:
            body_vars = [("?", "v0")]
            body[0] = (body_vars[0], body[0][1], body[0][2])

        def head_term():
            return rng.choice(body_vars) if rng.random() < 0.6 else const()

        head = [(head_term(), pred(), head_term())
                for _ in range(rng.randint(1, 2))]
        rules.append((body, head))

    goal_vars = [("?", f"g{i}") for i in range(2)]

    def goal_term():
        return rng.choice(goal_vars) if rng.random() < 0.5 else const()

    goal = [(goal_term(), pred(), goal_term()) for _ in range(rng.randint(1, 2))]
    return OracleInstance(facts=facts, rules=rules, goal=goal)


def instance_to_engine(instance: OracleInstance):
    """The same instance as engine inputs."""

    def term(t):
        return UniversalVar(t[1]) if isinstance(t, tuple) else Uri(t)

    def triple(atom):
        return Triple(term(atom[0]), term(atom[1]), term(atom[2]))

    kb = reason.KnowledgeBase()
    kb.add_source("facts", Document(prefixes={}, body=Formula(
        [triple(f) for f in instance.facts])))
    rule_sources = []
    for i, (body, head) in enumerate(instance.rules):
        imp = Implication(GraphTerm(Formula([triple(a) for a in body])),
                          GraphTerm(Formula([triple(a) for a in head])))
        rule_sources.append((f"rule{i}", Document(prefixes={}, body=Formula((), (imp,)))))
    goal_formula = Formula([triple(a) for a in instance.goal])
    goal_imp = Implication(GraphTerm(goal_formula), GraphTerm(goal_formula))
    goal = reason.FilterRule.from_document(
        "goal", Document(prefixes={}, body=Formula((), (goal_imp,))))
    return kb, rule_sources, goal


def engine_derivable(instance: OracleInstance) -> bool:
    kb, rule_sources, goal = instance_to_engine(instance)
    try:
        reason.prove(kb, rule_sources, goal,
                     reason.Budget(max_steps=50_000, max_seconds=30.0))
        return True
    except reason.Unprovable:
        return False


# ---------------------------------------------------------------------------
# Proof mutations for the checker suite
# ---------------------------------------------------------------------------

MUTANT = Uri("urn:uuid:mutant")


def _clone(proof: reason.Proof) -> reason.Proof:
    return copy.deepcopy(proof)


def proof_mutations(proof: reason.Proof) -> Iterator[Tuple[str, reason.Proof]]:
    """Single-field mutations, each genuinely altering proof content."""
    for ident, step in proof.steps.items():
        if step.kind == "Inference":
            for b_idx, (pos, value) in enumerate(step.bindings):
                if value != MUTANT:
                    mutated = _clone(proof)
                    bindings = mutated.steps[ident].bindings
                    bindings[b_idx] = (pos, MUTANT)
                    yield f"{ident}:binding-value-{b_idx}", mutated
                mutated = _clone(proof)
                del mutated.steps[ident].bindings[b_idx]
                yield f"{ident}:binding-removed-{b_idx}", mutated
                mutated = _clone(proof)
                mutated.steps[ident].bindings[b_idx] = (pos + 50, value)
                yield f"{ident}:binding-position-{b_idx}", mutated
            mutated = _clone(proof)
            extra = Triple(MUTANT, MUTANT, MUTANT)
            mutated.steps[ident].gives = step.gives.conjoin(Formula([extra]))
            yield f"{ident}:gives-extended", mutated
            if len(step.evidence) > 1:
                first = proof.steps[step.evidence[0]].gives
                second = proof.steps[step.evidence[1]].gives
                if first != second:
                    mutated = _clone(proof)
                    ev = mutated.steps[ident].evidence
                    ev[0], ev[1] = ev[1], ev[0]
                    yield f"{ident}:evidence-swapped", mutated
        if step.kind == "Parsing":
            mutated = _clone(proof)
            mutated.steps[ident].source = "urn:uuid:unknown-source"
            yield f"{ident}:source-swapped", mutated
            mutated = _clone(proof)
            mutated.steps[ident].gives = step.gives.conjoin(
                Formula([Triple(MUTANT, MUTANT, MUTANT)]))
            yield f"{ident}:parsing-gives", mutated
        if step.kind == "Extraction":
            mutated = _clone(proof)
            mutated.steps[ident].gives = Formula([Triple(MUTANT, MUTANT, MUTANT)])
            yield f"{ident}:extraction-gives", mutated
        if step.kind == "Proof":
            mutated = _clone(proof)
            mutated.steps[ident].gives = step.gives.conjoin(
                Formula([Triple(MUTANT, MUTANT, MUTANT)]))
            yield f"{ident}:root-gives", mutated

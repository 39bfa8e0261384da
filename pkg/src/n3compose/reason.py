"""Rule engine deriving filter-rule consequents from a knowledge base,
emitting checkable proofs in the r: proof vocabulary, plus an independent
proof checker.

The engine runs a goal-relevance-filtered, round-based saturation:

  1. Rules reachable backward from the goal's predicates are selected;
     everything else (e.g. benchmark dummies) is never even indexed.
  2. Background rules (existential-free) are saturated to fixpoint first,
     so goals that follow from data alone yield proofs with zero
     description-rule inferences.
  3. Description rules (which may introduce existentials in their heads)
     are then applied in breadth-first rounds with skolemization; the
     search stops as soon as the goal becomes derivable, or when a
     fixpoint or the budget is reached.

The resulting proof is a DAG of Parsing / Extraction / Inference steps
with a single root of kind Proof, mirroring the structure the r:
vocabulary describes.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from . import n3
from .n3 import (
    Document, ExistentialVar, Formula, GraphTerm, Implication, Literal,
    Substitution, Term, Triple, UniversalVar, Uri, _term_key,
)

REASON_NS = "http://www.w3.org/2000/10/swap/reason#"
REI_NS = "http://www.w3.org/2004/06/rei#"


class ReasonError(Exception):
    """Invalid input to the reasoner (malformed rules, goals, proofs)."""


class Unprovable(Exception):
    """Search space exhausted below the budget with no derivation."""


class BudgetExceeded(Exception):
    """An execution bound was hit before the search finished."""


@dataclass(frozen=True)
class Budget:
    max_steps: int = 100_000
    max_seconds: float = 60.0

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_seconds <= 0:
            raise ValueError("budget bounds must be positive")


# ---------------------------------------------------------------------------
# Knowledge base and rule containers
# ---------------------------------------------------------------------------

class KnowledgeBase:
    """Ordered, source-attributed facts and background rules."""

    def __init__(self):
        self.sources: List[Tuple[str, Document]] = []

    def add_source(self, iri: str, doc: Document) -> None:
        if any(existing == iri for existing, _ in self.sources):
            raise ReasonError(f"duplicate source {iri!r}")
        for atom in doc.body.atoms:
            for var in n3.iter_variables(Formula([atom])):
                if isinstance(var, UniversalVar):
                    raise ReasonError(f"fact with universal variable in {iri!r}: {atom!r}")
        self.sources.append((iri, doc))

    def add_text(self, iri: str, text: str) -> None:
        self.add_source(iri, n3.parse_document(text))

    def source_documents(self) -> Dict[str, Document]:
        return dict(self.sources)


@dataclass
class FilterRule:
    """The goal handed to the reasoner as ``{f} => {g}``."""

    source: str
    antecedent: Formula
    consequent: Formula
    document: Document

    @classmethod
    def from_document(cls, iri: str, doc: Document) -> "FilterRule":
        if len(doc.body.implications) != 1 or doc.body.atoms:
            raise ReasonError("goal document must contain exactly one implication")
        imp = doc.body.implications[0]
        if not isinstance(imp.antecedent, GraphTerm) or not isinstance(imp.consequent, GraphTerm):
            raise ReasonError("goal implication sides must be graph terms")
        body = doc.body
        for var in n3.iter_variables(body):
            if isinstance(var, ExistentialVar):
                raise ReasonError("goal must not contain existential variables")
        if n3.components(imp.antecedent.formula, 2) or n3.components(imp.consequent.formula, 2):
            raise ReasonError("goal must not contain nested graph terms")
        return cls(iri, imp.antecedent.formula, imp.consequent.formula, doc)


@dataclass
class _Rule:
    source: str
    implication: Implication
    body: Tuple[Triple, ...]
    head: Tuple[Triple, ...]
    var_order: List[Term]
    head_existentials: List[ExistentialVar]
    is_description: bool


def _compile_rules(sources: Sequence[Tuple[str, Document]], is_description: bool) -> List[_Rule]:
    rules = []
    for iri, doc in sources:
        for imp in doc.body.implications:
            if not isinstance(imp.antecedent, GraphTerm) or not isinstance(imp.consequent, GraphTerm):
                continue  # constraint rules ({..} => false) play no role in derivation
            body_f = imp.antecedent.formula
            head_f = imp.consequent.formula
            if body_f.implications or head_f.implications:
                raise ReasonError(f"nested implications not supported in rule from {iri!r}")
            var_order = n3.variables_in_order(Formula((), (imp,)))
            body_vars = set(n3.variables_in_order(body_f))
            head_exis = [v for v in n3.variables_in_order(head_f)
                         if isinstance(v, ExistentialVar) and v not in body_vars]
            rules.append(_Rule(iri, imp, body_f.atoms, head_f.atoms,
                               var_order, head_exis, is_description))
    return rules


# ---------------------------------------------------------------------------
# Proof data model
# ---------------------------------------------------------------------------

PROOF_KINDS = ("Proof", "Parsing", "Extraction", "Conjunction", "Inference")


@dataclass
class ProofStep:
    ident: str
    kind: str
    gives: Formula
    source: Optional[str] = None          # Parsing
    because: Optional[str] = None         # Extraction
    components: List[str] = field(default_factory=list)   # Proof / Conjunction
    rule: Optional[str] = None            # Inference
    evidence: List[str] = field(default_factory=list)     # Inference
    bindings: List[Tuple[int, Term]] = field(default_factory=list)
    # binding keys are canonical variable positions (first-occurrence order
    # over the rule implication), rendered as var#xN in serialized proofs


@dataclass
class Proof:
    root: str
    steps: Dict[str, ProofStep]
    skolem_count: int = 0

    def step(self, ident: str) -> ProofStep:
        return self.steps[ident]

    def inference_steps(self) -> List[ProofStep]:
        return [s for s in self.steps.values() if s.kind == "Inference"]

    def topological_order(self) -> List[str]:
        """Step idents, dependencies before dependents."""
        order: List[str] = []
        seen: Set[str] = set()
        active: Set[str] = set()

        def visit(ident: str):
            if ident in seen:
                return
            if ident in active:
                raise ReasonError(f"cyclic step graph at {ident!r}")
            active.add(ident)
            step = self.steps[ident]
            for dep in _step_dependencies(step):
                if dep not in self.steps:
                    raise ReasonError(f"dangling step reference {dep!r} in {ident!r}")
                visit(dep)
            active.discard(ident)
            seen.add(ident)
            order.append(ident)

        visit(self.root)
        for ident in self.steps:
            visit(ident)
        return order


def _step_dependencies(step: ProofStep) -> List[str]:
    deps = list(step.components) + list(step.evidence)
    if step.because:
        deps.append(step.because)
    if step.rule:
        deps.append(step.rule)
    return deps


# ---------------------------------------------------------------------------
# The chase engine
# ---------------------------------------------------------------------------

_WILDCARD = ("*",)


def _pred_key(term: Term):
    if isinstance(term, UniversalVar):
        return _WILDCARD
    return _term_key(term)


@dataclass
class _App:
    rule: _Rule
    theta: Dict[Term, Term]
    body_idxs: Tuple[int, ...]
    head_instance: Tuple[Triple, ...]


class _Chase:
    def __init__(self, budget: Budget):
        self.budget = budget
        self.deadline = time.monotonic() + budget.max_seconds
        self.atoms: List[Triple] = []
        self.prov: List[object] = []          # ("source", iri) | ("app", app_idx)
        self.atom_keys: Dict[tuple, int] = {}
        self.pred_index: Dict[tuple, List[int]] = {}
        self.apps: List[_App] = []
        self.app_keys: Set[tuple] = set()
        self.skolem_count = 0
        self.steps_used = 0

    # -- storage ------------------------------------------------------------

    def add_atom(self, atom: Triple, prov) -> Optional[int]:
        key = _term_key(atom)
        if key in self.atom_keys:
            return None
        idx = len(self.atoms)
        self.atoms.append(atom)
        self.prov.append(prov)
        self.atom_keys[key] = idx
        self.pred_index.setdefault(_pred_key(atom.predicate), []).append(idx)
        return idx

    def atom_index(self, atom: Triple) -> int:
        return self.atom_keys[_term_key(atom)]

    # -- matching -----------------------------------------------------------

    def _candidates(self, pattern: Triple) -> Iterator[int]:
        key = _pred_key(pattern.predicate)
        if key == _WILDCARD:
            yield from range(len(self.atoms))
            return
        yield from self.pred_index.get(key, ())
        yield from self.pred_index.get(_WILDCARD, ())

    def match_conjunction(self, patterns: Sequence[Triple],
                          frontier_start: Optional[int] = None,
                          ground_only: bool = False,
                          limit: Optional[int] = None) -> Iterator[Tuple[Dict[Term, Term], Tuple[int, ...]]]:
        """Yield (theta, atom index tuple) homomorphisms, conjunct by
        conjunct, candidates in insertion order; atoms at index >= limit
        are invisible. With a frontier, enumeration is restricted so that
        at least one conjunct binds a frontier atom (each match yielded
        once, via its first frontier position)."""
        cutoff = len(self.atoms) if limit is None else limit

        def rec(i: int, theta: Dict[Term, Term], idxs: Tuple[int, ...], bounds):
            if i == len(patterns):
                yield theta, idxs
                return
            lo, hi = bounds[i]
            for idx in self._candidates(patterns[i]):
                if idx < lo or idx >= hi:
                    continue
                atom = self.atoms[idx]
                if ground_only and not all(n3.term_is_ground(t) for t in atom.terms()):
                    continue
                theta2 = _unify_triple(patterns[i], atom, theta)
                if theta2 is not None:
                    yield from rec(i + 1, theta2, idxs + (idx,), bounds)

        count = len(patterns)
        if frontier_start is None:
            yield from rec(0, {}, (), [(0, cutoff)] * count)
            return
        fs = min(frontier_start, cutoff)
        for p in range(count):
            bounds = [(0, fs) if j < p else (fs, cutoff) if j == p else (0, cutoff)
                      for j in range(count)]
            yield from rec(0, {}, (), bounds)

    def _head_satisfied(self, rule: "_Rule", theta: Dict[Term, Term]) -> bool:
        """True when the head instance already has a homomorphic image among
        the derived atoms, with the head existentials as bindable witnesses."""
        sub = Substitution(dict(theta))
        patterns = tuple(
            n3.apply_substitution(Formula(rule.head), sub, mode="total").atoms)
        exis = frozenset(rule.head_existentials)

        def rec(i: int, binding: Dict[Term, Term]) -> bool:
            if i == len(patterns):
                return True
            for idx in self._candidates(patterns[i]):
                b2 = _unify_triple_loose(patterns[i], self.atoms[idx], binding, exis)
                if b2 is not None and rec(i + 1, b2):
                    return True
            return False

        return rec(0, {})

    # -- rule application ---------------------------------------------------

    def fire(self, rules: Sequence[_Rule], frontier_start: Optional[int]) -> int:
        """Fire every new application of the given rules; returns the
        number of new atoms added."""
        added = 0
        snapshot = len(self.atoms)   # match only against atoms existing at round start
        for rule_idx, rule in enumerate(rules):
            for theta, idxs in self._match_in_snapshot(rule, snapshot, frontier_start):
                key = (rule.source, id(rule.implication), idxs)
                if key in self.app_keys:
                    continue
                self.app_keys.add(key)
                # restricted chase: a head already satisfiable by existing
                # atoms (existentials as witnesses) adds nothing new
                if rule.head_existentials and self._head_satisfied(rule, theta):
                    continue
                self._check_budget()
                full_theta = dict(theta)
                for exi in rule.head_existentials:
                    full_theta[exi] = ExistentialVar(f"sk{self.skolem_count}")
                    self.skolem_count += 1
                sub = Substitution(full_theta)
                head_instance = tuple(
                    n3.apply_substitution(Formula(rule.head), sub, mode="total").atoms)
                app = _App(rule, full_theta, idxs, head_instance)
                app_idx = len(self.apps)
                self.apps.append(app)
                for atom in head_instance:
                    if self.add_atom(atom, ("app", app_idx)) is not None:
                        added += 1
        return added

    def _match_in_snapshot(self, rule: _Rule, snapshot: int, frontier_start: Optional[int]):
        return list(self.match_conjunction(rule.body, frontier_start, limit=snapshot))

    def _check_budget(self):
        self.steps_used += 1
        if self.steps_used > self.budget.max_steps:
            raise BudgetExceeded(f"inference budget of {self.budget.max_steps} applications hit")
        if time.monotonic() > self.deadline:
            raise BudgetExceeded("time budget hit")


def _unify_term(pattern: Term, value: Term, theta: Dict[Term, Term]) -> Optional[Dict[Term, Term]]:
    if isinstance(pattern, UniversalVar):
        bound = theta.get(pattern)
        if bound is None:
            theta = dict(theta)
            theta[pattern] = value
            return theta
        return theta if bound == value else None
    if isinstance(pattern, n3.ListTerm) and isinstance(value, n3.ListTerm):
        if len(pattern.items) != len(value.items):
            return None
        for p, v in zip(pattern.items, value.items):
            theta = _unify_term(p, v, theta)
            if theta is None:
                return None
        return theta
    return theta if pattern == value else None


def _unify_triple(pattern: Triple, atom: Triple, theta: Dict[Term, Term]) -> Optional[Dict[Term, Term]]:
    for p, v in zip(pattern.terms(), atom.terms()):
        theta = _unify_term(p, v, theta)
        if theta is None:
            return None
    return theta


def _unify_term_loose(pattern: Term, value: Term, theta: Dict[Term, Term],
                      exis: frozenset) -> Optional[Dict[Term, Term]]:
    # like _unify_term, but the listed existentials bind as well
    if isinstance(pattern, UniversalVar) or pattern in exis:
        bound = theta.get(pattern)
        if bound is None:
            theta = dict(theta)
            theta[pattern] = value
            return theta
        return theta if bound == value else None
    if isinstance(pattern, n3.ListTerm) and isinstance(value, n3.ListTerm):
        if len(pattern.items) != len(value.items):
            return None
        for p, v in zip(pattern.items, value.items):
            theta = _unify_term_loose(p, v, theta, exis)
            if theta is None:
                return None
        return theta
    return theta if pattern == value else None


def _unify_triple_loose(pattern: Triple, atom: Triple, theta: Dict[Term, Term],
                        exis: frozenset) -> Optional[Dict[Term, Term]]:
    for p, v in zip(pattern.terms(), atom.terms()):
        theta = _unify_term_loose(p, v, theta, exis)
        if theta is None:
            return None
    return theta


# ---------------------------------------------------------------------------
# Goal-directed relevance filter
# ---------------------------------------------------------------------------

def _relevant_rules(goal: Formula, rules: Sequence[_Rule]) -> List[_Rule]:
    wanted: Set[tuple] = set()
    for atom in goal.atoms:
        wanted.add(_pred_key(atom.predicate))
    if _WILDCARD in wanted:
        return list(rules)
    head_keys = [frozenset(_pred_key(t.predicate) for t in rule.head)
                 for rule in rules]
    body_keys = [frozenset(_pred_key(t.predicate) for t in rule.body)
                 for rule in rules]
    chosen: Set[int] = set()
    pending = list(range(len(rules)))
    changed = True
    while changed:
        changed = False
        remaining = []
        for i in pending:
            if _WILDCARD in head_keys[i] or head_keys[i] & wanted:
                chosen.add(i)
                changed = True
                wanted |= body_keys[i]
            else:
                remaining.append(i)
        pending = remaining
    return [rule for i, rule in enumerate(rules) if i in chosen]


# ---------------------------------------------------------------------------
# prove
# ---------------------------------------------------------------------------

def prove(kb: KnowledgeBase, rule_sources: Sequence[Tuple[str, Document]],
          filter_rule: FilterRule, budget: Budget = Budget()) -> Proof:
    """Derive an instance of the filter rule's consequent.

    Raises Unprovable or BudgetExceeded on failure; the two are distinct.
    """
    chase = _Chase(budget)
    for iri, doc in kb.sources:
        for atom in doc.body.atoms:
            chase.add_atom(atom, ("source", iri))

    b_rules = _compile_rules(kb.sources, is_description=False)
    d_rules = _compile_rules(rule_sources, is_description=True)
    relevant = _relevant_rules(filter_rule.antecedent, b_rules + d_rules)
    relevant_b = [r for r in relevant if not r.is_description]

    # Phase 1: background closure (existential-free, terminates).
    frontier = None
    while True:
        added = chase.fire(relevant_b, frontier)
        if added == 0:
            break
        frontier = len(chase.atoms) - added

    match = _match_goal(chase, filter_rule)
    if match is None:
        # Phase 2: description rules, breadth-first, stop on first success.
        frontier = None
        while True:
            added = chase.fire(relevant, frontier)
            match = _match_goal(chase, filter_rule)
            if match is not None:
                break
            if added == 0:
                raise Unprovable("goal not derivable; saturation reached a fixpoint")
            frontier = len(chase.atoms) - added

    theta, idxs = match
    source_bodies: Dict[str, Formula] = {filter_rule.source: filter_rule.document.body}
    for iri, doc in list(kb.sources) + list(rule_sources):
        source_bodies[iri] = doc.body
    return _build_proof(chase, filter_rule, theta, idxs, source_bodies)


def _match_goal(chase: _Chase, filter_rule: FilterRule):
    patterns = filter_rule.antecedent.atoms
    if not patterns:
        return {}, ()
    for theta, idxs in chase.match_conjunction(patterns, ground_only=True):
        return theta, idxs
    for theta, idxs in chase.match_conjunction(patterns):
        return theta, idxs
    return None


# ---------------------------------------------------------------------------
# Proof construction
# ---------------------------------------------------------------------------

class _ProofBuilder:
    def __init__(self, chase: _Chase, filter_rule: FilterRule):
        self.chase = chase
        self.filter_rule = filter_rule
        self.steps: Dict[str, ProofStep] = {}
        self.counter = 0
        self.parsing_memo: Dict[str, str] = {}
        self.extraction_memo: Dict[tuple, str] = {}
        self.inference_memo: Dict[int, str] = {}
        self.rule_step_memo: Dict[tuple, str] = {}

    def new_step(self, **kwargs) -> ProofStep:
        ident = f"step{self.counter}"
        self.counter += 1
        step = ProofStep(ident=ident, **kwargs)
        self.steps[ident] = step
        return step

    def parsing(self, iri: str, gives: Formula) -> str:
        if iri not in self.parsing_memo:
            step = self.new_step(kind="Parsing", gives=gives, source=iri)
            self.parsing_memo[iri] = step.ident
        return self.parsing_memo[iri]

    def _extract(self, because: str, gives: Formula) -> str:
        key = (because, gives._canonical_key())
        if key not in self.extraction_memo:
            step = self.new_step(kind="Extraction", gives=gives, because=because)
            self.extraction_memo[key] = step.ident
        return self.extraction_memo[key]

    def atom_step(self, idx: int, source_bodies: Dict[str, Formula]) -> str:
        atom = self.chase.atoms[idx]
        prov = self.chase.prov[idx]
        if prov[0] == "source":
            iri = prov[1]
            parsing_id = self.parsing(iri, source_bodies[iri])
            return self._extract(parsing_id, Formula([atom]))
        app_idx = prov[1]
        inf_id = self.inference(app_idx, source_bodies)
        inf = self.steps[inf_id]
        if len(inf.gives.atoms) == 1 and not inf.gives.implications:
            return inf_id
        return self._extract(inf_id, Formula([atom]))

    def inference(self, app_idx: int, source_bodies: Dict[str, Formula]) -> str:
        if app_idx in self.inference_memo:
            return self.inference_memo[app_idx]
        app = self.chase.apps[app_idx]
        evidence = [self.atom_step(i, source_bodies) for i in app.body_idxs]
        rule_id = self.rule_step_for(app.rule, source_bodies)
        bindings = [(pos, app.theta[var]) for pos, var in enumerate(app.rule.var_order)
                    if var in app.theta]
        step = self.new_step(kind="Inference", gives=Formula(app.head_instance),
                             rule=rule_id, evidence=evidence, bindings=bindings)
        self.inference_memo[app_idx] = step.ident
        return step.ident

    def rule_step_for(self, rule: _Rule, source_bodies: Dict[str, Formula]) -> str:
        key = (rule.source, id(rule.implication))
        if key not in self.rule_step_memo:
            parsing_id = self.parsing(rule.source, source_bodies[rule.source])
            self.rule_step_memo[key] = self._extract(parsing_id, Formula((), (rule.implication,)))
        return self.rule_step_memo[key]


def _build_proof(chase: _Chase, filter_rule: FilterRule,
                 theta: Dict[Term, Term], idxs: Tuple[int, ...],
                 source_bodies: Dict[str, Formula]) -> Proof:
    builder = _ProofBuilder(chase, filter_rule)
    evidence = [builder.atom_step(i, source_bodies) for i in idxs]

    goal_imp = filter_rule.document.body.implications[0]
    goal_rule = _Rule(
        source=filter_rule.source,
        implication=goal_imp,
        body=filter_rule.antecedent.atoms,
        head=filter_rule.consequent.atoms,
        var_order=n3.variables_in_order(Formula((), (goal_imp,))),
        head_existentials=[],
        is_description=False,
    )
    rule_id = builder.rule_step_for(goal_rule, source_bodies)
    sub = Substitution(theta) if theta else Substitution({})
    conclusion = n3.apply_substitution(filter_rule.consequent, sub, mode="total")
    bindings = [(pos, theta[var]) for pos, var in enumerate(goal_rule.var_order) if var in theta]
    goal_step = builder.new_step(kind="Inference", gives=conclusion, rule=rule_id,
                                 evidence=evidence, bindings=bindings)

    root = builder.new_step(kind="Proof", gives=conclusion, components=[goal_step.ident])
    proof = Proof(root=root.ident, steps=builder.steps, skolem_count=chase.skolem_count)
    _renumber(proof)
    return proof


def _renumber(proof: Proof) -> None:
    """Assign ids in DFS preorder from the root: root is 'proof', the rest
    lemma1..lemmaN."""
    order: List[str] = []
    seen: Set[str] = set()

    def visit(ident: str):
        if ident in seen:
            return
        seen.add(ident)
        order.append(ident)
        step = proof.steps[ident]
        for dep in step.components + step.evidence:
            visit(dep)
        if step.rule:
            visit(step.rule)
        if step.because:
            visit(step.because)

    visit(proof.root)
    for ident in list(proof.steps):
        visit(ident)

    mapping: Dict[str, str] = {}
    lemma = 0
    for ident in order:
        if ident == proof.root:
            mapping[ident] = "proof"
        else:
            lemma += 1
            mapping[ident] = f"lemma{lemma}"

    new_steps: Dict[str, ProofStep] = {}
    for ident in order:
        step = proof.steps[ident]
        step.ident = mapping[ident]
        step.components = [mapping[c] for c in step.components]
        step.evidence = [mapping[e] for e in step.evidence]
        step.rule = mapping[step.rule] if step.rule else None
        step.because = mapping[step.because] if step.because else None
        new_steps[step.ident] = step
    proof.root = mapping[proof.root]
    proof.steps = new_steps


# ---------------------------------------------------------------------------
# Rule-application counting
# ---------------------------------------------------------------------------

def rule_source_of_inference(proof: Proof, step: ProofStep) -> Optional[str]:
    """The source IRI the inference's rule was parsed from, following the
    Extraction chain."""
    ident = step.rule
    while ident is not None:
        current = proof.steps.get(ident)
        if current is None:
            return None
        if current.kind == "Parsing":
            return current.source
        ident = current.because
    return None


def count_rule_applications(proof: Proof, rule_iris: Iterable[str]) -> int:
    wanted = set(rule_iris)
    count = 0
    for step in proof.inference_steps():
        if rule_source_of_inference(proof, step) in wanted:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Proof checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    step: str
    condition: str
    detail: str = ""

    def __str__(self) -> str:
        out = f"{self.step}: {self.condition}"
        return out + (f" ({self.detail})" if self.detail else "")


def check_proof(proof: Proof, sources: Dict[str, Document]) -> List[Violation]:
    """Verify every proof step independently; an empty list means Valid."""
    violations: List[Violation] = []

    try:
        topo = proof.topological_order()
    except ReasonError as exc:
        return [Violation(proof.root, "step-graph", str(exc))]

    root = proof.steps.get(proof.root)
    if root is None or root.kind != "Proof":
        violations.append(Violation(proof.root, "root-kind", "root must be of kind Proof"))

    gives_so_far: Dict[str, Formula] = {}
    for ident in topo:
        step = proof.steps[ident]
        if step.kind not in PROOF_KINDS:
            violations.append(Violation(ident, "unknown-kind", step.kind))
            continue
        checker = _STEP_CHECKS[step.kind]
        violations.extend(checker(proof, step, sources))
        gives_so_far[ident] = step.gives

    violations.extend(_check_skolem_freshness(proof, topo))
    return violations


def _check_parsing(proof: Proof, step: ProofStep, sources: Dict[str, Document]) -> List[Violation]:
    if step.source is None:
        return [Violation(step.ident, "parsing-source", "missing source IRI")]
    doc = sources.get(step.source)
    if doc is None:
        return [Violation(step.ident, "parsing-source", f"unknown source {step.source!r}")]
    if doc.body != step.gives:
        return [Violation(step.ident, "parsing-gives",
                          "gives differs from the parsed source document")]
    return []


def _check_extraction(proof: Proof, step: ProofStep, sources) -> List[Violation]:
    if step.because is None:
        return [Violation(step.ident, "extraction-because", "missing because reference")]
    parent = proof.steps[step.because].gives
    if not _is_subconjunction(step.gives, parent):
        return [Violation(step.ident, "extraction-subset",
                          "gives is not a subconjunction of the because step")]
    return []


def _check_conjunction(proof: Proof, step: ProofStep, sources) -> List[Violation]:
    combined = Formula()
    for comp in step.components:
        combined = combined.conjoin(proof.steps[comp].gives)
    if combined != step.gives:
        return [Violation(step.ident, "conjunction-gives",
                          "gives is not the conjunction of its components")]
    return []


def _check_inference(proof: Proof, step: ProofStep, sources) -> List[Violation]:
    violations: List[Violation] = []
    if step.rule is None:
        return [Violation(step.ident, "inference-rule", "missing rule reference")]
    rule_gives = proof.steps[step.rule].gives
    if len(rule_gives.implications) != 1:
        return [Violation(step.ident, "inference-rule",
                          "rule step does not give exactly one implication")]
    imp = rule_gives.implications[0]
    if not isinstance(imp.antecedent, GraphTerm) or not isinstance(imp.consequent, GraphTerm):
        return [Violation(step.ident, "inference-rule", "rule sides must be graph terms")]
    var_order = n3.variables_in_order(Formula((), (imp,)))
    pairs: Dict[Term, Term] = {}
    for pos, value in step.bindings:
        if pos < 0 or pos >= len(var_order):
            violations.append(Violation(step.ident, "binding-variable",
                                        f"no variable at position {pos}"))
            continue
        pairs[var_order[pos]] = value
    if violations:
        return violations
    sub = Substitution(pairs)
    antecedent = n3.apply_substitution(imp.antecedent.formula, sub, mode="total")
    consequent = n3.apply_substitution(imp.consequent.formula, sub, mode="total")

    if len(step.evidence) != len(antecedent.atoms) or antecedent.implications:
        violations.append(Violation(step.ident, "evidence-arity",
                                    "evidence count differs from antecedent conjunct count"))
    else:
        for conjunct, ev_id in zip(antecedent.atoms, step.evidence):
            ev_gives = proof.steps[ev_id].gives
            if Formula([conjunct]) != ev_gives and conjunct not in ev_gives.atoms:
                violations.append(Violation(step.ident, "evidence-mismatch",
                                            f"evidence {ev_id} does not give {conjunct!r}"))
            if Formula([conjunct]) != ev_gives and conjunct in ev_gives.atoms \
                    and len(ev_gives.atoms) != 1:
                # a multi-atom evidence step must still contain the conjunct;
                # containment was already established above
                pass

    if consequent != step.gives:
        violations.append(Violation(step.ident, "inference-gives",
                                    "gives differs from the instantiated consequent"))
    for var in n3.iter_variables(step.gives):
        if isinstance(var, UniversalVar):
            violations.append(Violation(step.ident, "universal-in-gives", repr(var)))
            break
    return violations


def _check_proof_root(proof: Proof, step: ProofStep, sources) -> List[Violation]:
    return _check_conjunction(proof, step, sources)


_STEP_CHECKS = {
    "Parsing": _check_parsing,
    "Extraction": _check_extraction,
    "Conjunction": _check_conjunction,
    "Inference": _check_inference,
    "Proof": _check_proof_root,
}


def _is_subconjunction(part: Formula, whole: Formula) -> bool:
    from collections import Counter
    part_atoms = Counter(_term_key(a) for a in part.atoms)
    whole_atoms = Counter(_term_key(a) for a in whole.atoms)
    if part_atoms - whole_atoms:
        return False
    part_imps = Counter((_term_key(i.antecedent), _term_key(i.consequent)) for i in part.implications)
    whole_imps = Counter((_term_key(i.antecedent), _term_key(i.consequent)) for i in whole.implications)
    return not (part_imps - whole_imps)


def _check_skolem_freshness(proof: Proof, topo: List[str]) -> List[Violation]:
    violations = []
    position = {ident: i for i, ident in enumerate(topo)}
    for ident in topo:
        step = proof.steps[ident]
        if step.kind != "Inference":
            continue
        introduced = _introduced_skolems(proof, step)
        if not introduced:
            continue
        for dep in _transitive_dependencies(proof, ident):
            dep_gives = proof.steps[dep].gives
            for var in n3.iter_variables(dep_gives):
                if isinstance(var, ExistentialVar) and var in introduced:
                    violations.append(Violation(ident, "skolem-freshness",
                                                f"{var!r} already occurs in {dep}"))
    return violations


def _introduced_skolems(proof: Proof, step: ProofStep) -> Set[ExistentialVar]:
    rule_gives = proof.steps[step.rule].gives if step.rule else None
    if rule_gives is None or len(rule_gives.implications) != 1:
        return set()
    imp = rule_gives.implications[0]
    var_order = n3.variables_in_order(Formula((), (imp,)))
    body_vars = set()
    if isinstance(imp.antecedent, GraphTerm):
        body_vars = set(n3.variables_in_order(imp.antecedent.formula))
    introduced = set()
    for pos, value in step.bindings:
        if 0 <= pos < len(var_order):
            var = var_order[pos]
            if isinstance(var, ExistentialVar) and var not in body_vars \
                    and isinstance(value, ExistentialVar):
                introduced.add(value)
    return introduced


def _transitive_dependencies(proof: Proof, ident: str) -> Set[str]:
    seen: Set[str] = set()
    stack = list(_step_dependencies(proof.steps[ident]))
    while stack:
        current = stack.pop()
        if current in seen or current not in proof.steps:
            continue
        seen.add(current)
        stack.extend(_step_dependencies(proof.steps[current]))
    return seen


# ---------------------------------------------------------------------------
# Proof serialization (r: vocabulary)
# ---------------------------------------------------------------------------

def serialize_proof(proof: Proof, prefixes: Optional[Dict[str, str]] = None,
                    elide_extractions: bool = False) -> str:
    prefixes = dict(prefixes or {})
    prefixes.setdefault("r", REASON_NS)
    prefixes.setdefault("n3", REI_NS)

    steps = proof.steps
    elided: Dict[str, str] = {}
    if elide_extractions:
        for ident, step in steps.items():
            if step.kind == "Extraction" and step.because \
                    and steps[step.because].kind == "Inference":
                elided[ident] = step.because

    def ref(ident: str) -> str:
        while ident in elided:
            ident = elided[ident]
        return f"<#{ident}>"

    lines: List[str] = []
    for label in sorted(prefixes):
        lines.append(f"@prefix {label}: <{prefixes[label]}>.")
    lines.append("")

    order = [proof.root] + [i for i in steps if i != proof.root]
    for ident in order:
        if ident in elided:
            continue
        step = steps[ident]
        types = "r:" + step.kind
        if step.kind == "Proof":
            types += ", r:Conjunction"
        parts = [f"<#{ident}> a {types}"]
        for comp in step.components:
            parts.append(f"  r:component {ref(comp)}")
        parts.append("  r:gives " + _serialize_graph(step.gives, prefixes))
        if step.kind == "Inference":
            ev = " ".join(ref(e) for e in step.evidence)
            parts.append(f"  r:evidence ({ev})")
            for pos, value in step.bindings:
                parts.append("  r:binding [ r:variable [ n3:uri \"var#x%d\"]; r:boundTo %s]"
                             % (pos, _serialize_bound(value, prefixes)))
            parts.append(f"  r:rule {ref(step.rule)}")
        if step.kind == "Extraction":
            parts.append(f"  r:because {ref(step.because)}")
        if step.kind == "Parsing":
            parts.append(f"  r:source <{step.source}>")
        lines.append(";\n".join(parts) + ".")
        lines.append("")
    return "\n".join(lines)


def _serialize_graph(formula: Formula, prefixes: Dict[str, str]) -> str:
    inner = n3.serialize_formula(formula, prefixes, indent="    ")
    if not inner:
        return "{ }"
    return "{\n" + "\n".join(inner) + "\n  }"


def _serialize_bound(value: Term, prefixes: Dict[str, str]) -> str:
    if isinstance(value, Uri):
        return '[ n3:uri "%s"]' % value.value
    if isinstance(value, ExistentialVar):
        return '[ n3:nodeId "_:%s"]' % value.name
    if isinstance(value, Literal):
        return n3._serialize_term(value, prefixes)
    raise ReasonError(f"cannot serialize binding value {value!r}")


# ---------------------------------------------------------------------------
# Proof parsing
# ---------------------------------------------------------------------------

def parse_proof(text: str) -> Proof:
    doc = n3.parse_document(text)
    subjects: Dict[tuple, List[Triple]] = {}
    order: List[Term] = []
    for atom in doc.body.atoms:
        key = _term_key(atom.subject)
        if key not in subjects:
            subjects[key] = []
            order.append(atom.subject)
        subjects[key].append(atom)

    def props(term: Term) -> List[Triple]:
        return subjects.get(_term_key(term), [])

    def obj_of(term: Term, pred: str) -> Optional[Term]:
        for atom in props(term):
            if isinstance(atom.predicate, Uri) and atom.predicate.value == pred:
                return atom.object
        return None

    steps: Dict[str, ProofStep] = {}
    root_id: Optional[str] = None
    for subject in order:
        if not isinstance(subject, Uri) or not subject.value.startswith("#"):
            continue
        ident = subject.value[1:]
        kinds = [a.object for a in props(subject)
                 if isinstance(a.predicate, Uri) and a.predicate.value == n3.RDF_TYPE]
        kind_names = [k.value[len(REASON_NS):] for k in kinds
                      if isinstance(k, Uri) and k.value.startswith(REASON_NS)]
        main_kind = next((k for k in ("Proof", "Inference", "Extraction", "Parsing", "Conjunction")
                          if k in kind_names), None)
        if main_kind is None:
            continue
        gives_term = obj_of(subject, REASON_NS + "gives")
        gives = gives_term.formula if isinstance(gives_term, GraphTerm) else Formula()
        step = ProofStep(ident=ident, kind=main_kind, gives=gives)
        if main_kind == "Proof":
            root_id = ident
            step.components = [_ref_id(a.object) for a in props(subject)
                               if _pred_is(a, "component")]
        if main_kind == "Parsing":
            src = obj_of(subject, REASON_NS + "source")
            step.source = src.value if isinstance(src, Uri) else None
        if main_kind == "Extraction":
            because = obj_of(subject, REASON_NS + "because")
            step.because = _ref_id(because)
        if main_kind == "Inference":
            rule = obj_of(subject, REASON_NS + "rule")
            step.rule = _ref_id(rule)
            evidence = obj_of(subject, REASON_NS + "evidence")
            if isinstance(evidence, n3.ListTerm):
                step.evidence = [_ref_id(e) for e in evidence.items]
            for atom in props(subject):
                if _pred_is(atom, "binding"):
                    step.bindings.append(_parse_binding(atom.object, props, obj_of))
        steps[ident] = step

    if root_id is None:
        raise ReasonError("proof document has no step of kind r:Proof")
    skolems = set()
    for step in steps.values():
        for var in n3.iter_variables(step.gives):
            if isinstance(var, ExistentialVar) and re.fullmatch(r"sk\d+", var.name):
                skolems.add(var.name)
    return Proof(root=root_id, steps=steps, skolem_count=len(skolems))


def _pred_is(atom: Triple, local: str) -> bool:
    return isinstance(atom.predicate, Uri) and atom.predicate.value == REASON_NS + local


def _ref_id(term: Optional[Term]) -> Optional[str]:
    if isinstance(term, Uri) and term.value.startswith("#"):
        return term.value[1:]
    return None


def _parse_binding(bnode: Term, props, obj_of) -> Tuple[int, Term]:
    var_node = obj_of(bnode, REASON_NS + "variable")
    bound_node = obj_of(bnode, REASON_NS + "boundTo")
    pos = -1
    if var_node is not None:
        uri = obj_of(var_node, REI_NS + "uri")
        if isinstance(uri, Literal):
            m = re.fullmatch(r"var#x(\d+)", uri.lexical)
            if m:
                pos = int(m.group(1))
    value: Term
    if isinstance(bound_node, Literal):
        value = bound_node
    else:
        uri = obj_of(bound_node, REI_NS + "uri") if bound_node is not None else None
        node_id = obj_of(bound_node, REI_NS + "nodeId") if bound_node is not None else None
        if isinstance(uri, Literal):
            value = Uri(uri.lexical)
        elif isinstance(node_id, Literal):
            name = node_id.lexical
            value = ExistentialVar(name[2:] if name.startswith("_:") else name)
        else:
            raise ReasonError("malformed r:binding structure")
    return pos, value

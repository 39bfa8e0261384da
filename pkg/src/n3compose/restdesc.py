"""Hypermedia API descriptions: implications whose consequent contains a
templated HTTP request plus the postcondition its execution realizes.

Handles validation of description documents, extraction of instantiated
requests from proofs, and conversion of sufficiently specified request
descriptions into executable wire requests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from . import n3, reason
from .n3 import (
    Document, ExistentialVar, Formula, GraphTerm, Implication, Literal,
    Term, Triple, UniversalVar, Uri,
)
from .reason import Proof, ProofStep

HTTP_NS = "http://www.w3.org/2011/http#"
METHOD_NAME = Uri(HTTP_NS + "methodName")
REQUEST_URI = Uri(HTTP_NS + "requestURI")
BODY = Uri(HTTP_NS + "body")
RESP = Uri(HTTP_NS + "resp")
HEADERS = Uri(HTTP_NS + "headers")

# the well-known token set; servers may extend it, so membership is not enforced
KNOWN_METHODS = {"GET", "POST", "PUT", "DELETE", "HEAD", "PATCH", "OPTIONS"}


class RestDescError(Exception):
    pass


class NotSufficientlySpecified(RestDescError):
    """A wire request was demanded from a template with variable holes."""


@dataclass(frozen=True)
class DescriptionViolation:
    condition: str
    term: Optional[Term] = None
    detail: str = ""

    def __str__(self) -> str:
        out = self.condition
        if self.term is not None:
            out += f": {self.term!r}"
        if self.detail:
            out += f" ({self.detail})"
        return out


@dataclass(frozen=True)
class HttpRequestDescription:
    """The request-describing triples of a consequent, grouped by their
    shared subject."""

    subject: Term
    triples: Tuple[Triple, ...]           # all triples in the request group
    method_name: Term
    request_uri: Optional[Term]
    body: Optional[Term]
    headers: Tuple[Term, ...]
    response: Optional[Term]              # the http:resp object
    response_body: Optional[Term]

    @property
    def sufficiently_specified(self) -> bool:
        """Every object of a non-resp triple on the request subject is
        ground; response placeholders are exempt by definition."""
        for triple in self.triples:
            if triple.subject != self.subject:
                continue
            if triple.predicate == RESP:
                continue
            if not n3.term_is_ground(triple.object):
                return False
        return True


@dataclass(frozen=True)
class WireRequest:
    method: str
    target: str
    body_ref: Optional[str] = None        # IRI of a local entity to send
    body_inline: Optional[str] = None     # literal payload
    headers: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.method or not self.target:
            raise ValueError("wire request needs a method and a target")


@dataclass(frozen=True)
class RestDescription:
    source: str
    precondition: Formula
    request: HttpRequestDescription
    postcondition: Formula
    implication: Implication
    document: Document

    def recompose(self) -> Formula:
        """Request group plus postcondition, as one consequent formula."""
        return Formula(self.request.triples + self.postcondition.atoms)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_description(doc: Document, source: str = "") \
        -> Union[RestDescription, List[DescriptionViolation]]:
    """Decompose a description document, or report every violated
    constraint of the description definition."""
    violations: List[DescriptionViolation] = []
    if len(doc.body.implications) != 1 or doc.body.atoms:
        raise RestDescError("description must be a single implication")
    imp = doc.body.implications[0]
    if not isinstance(imp.antecedent, GraphTerm) or not isinstance(imp.consequent, GraphTerm):
        raise RestDescError("description sides must be graph terms")
    pre = imp.antecedent.formula
    post_full = imp.consequent.formula
    if pre.implications or post_full.implications:
        violations.append(DescriptionViolation("simple-formula",
                                               detail="nested implications are not allowed"))
        return violations

    for var in n3.variables_in_order(pre):
        if isinstance(var, ExistentialVar):
            violations.append(DescriptionViolation("existential-in-precondition", var))

    request = _find_request(post_full, violations)
    if request is None:
        return violations

    postcondition = Formula([t for t in post_full.atoms if t not in request.triples])

    pre_universals = {v for v in n3.variables_in_order(pre) if isinstance(v, UniversalVar)}
    head = Formula(request.triples + postcondition.atoms)
    for var in n3.variables_in_order(head):
        if isinstance(var, UniversalVar) and var not in pre_universals:
            violations.append(DescriptionViolation("universal-not-in-precondition", var))

    for triple in postcondition.atoms:
        if triple.subject == request.subject:
            violations.append(DescriptionViolation("request-subject-in-postcondition", triple.subject))

    if violations:
        return violations
    return RestDescription(source=source, precondition=pre, request=request,
                           postcondition=postcondition, implication=imp, document=doc)


def _find_request(formula: Formula, violations: List[DescriptionViolation]) \
        -> Optional[HttpRequestDescription]:
    method_triples = [t for t in formula.atoms if t.predicate == METHOD_NAME]
    subjects = []
    for t in method_triples:
        if t.subject not in subjects:
            subjects.append(t.subject)
    if len(subjects) != 1:
        violations.append(DescriptionViolation(
            "request-subject", detail=f"{len(subjects)} http:methodName subjects, need exactly 1"))
        return None
    subject = subjects[0]
    if isinstance(subject, UniversalVar):
        violations.append(DescriptionViolation("request-subject-universal", subject))
        return None
    try:
        request = parse_request(formula, subject)
    except RestDescError as exc:
        violations.append(DescriptionViolation("request-shape", subject, str(exc)))
        return None
    if not isinstance(request.method_name, Literal):
        violations.append(DescriptionViolation("method-not-literal", request.method_name))
    if request.request_uri is None:
        violations.append(DescriptionViolation("missing-request-uri", subject))
    if violations:
        return None
    return request


def parse_request(formula: Formula, subject: Term) -> HttpRequestDescription:
    """Group the request triples rooted at `subject`, following http:resp
    and http:body links into response placeholders."""
    by_subject: Dict[tuple, List[Triple]] = {}
    for t in formula.atoms:
        by_subject.setdefault(n3._term_key(t.subject), []).append(t)

    group: List[Triple] = []
    seen: Set[tuple] = set()

    def collect(subj: Term, follow: bool):
        key = n3._term_key(subj)
        if key in seen:
            return
        seen.add(key)
        for t in by_subject.get(key, []):
            group.append(t)
            if follow and t.predicate in (RESP, BODY) \
                    and isinstance(t.object, ExistentialVar):
                collect(t.object, follow=t.predicate == RESP)

    collect(subject, follow=True)

    method = uri = body = resp = resp_body = None
    headers: List[Term] = []
    dup: Optional[str] = None
    for t in group:
        if t.subject != subject:
            continue
        if t.predicate == METHOD_NAME:
            if method is not None:
                dup = "methodName"
            method = t.object
        elif t.predicate == REQUEST_URI:
            if uri is not None:
                dup = "requestURI"
            uri = t.object
        elif t.predicate == BODY:
            body = t.object
        elif t.predicate == RESP:
            resp = t.object
        elif t.predicate == HEADERS:
            headers.append(t.object)
    if method is None:
        raise RestDescError("no http:methodName triple")
    if dup:
        raise RestDescError(f"more than one http:{dup} triple")
    if resp is not None:
        for t in group:
            if t.subject == resp and t.predicate == BODY:
                resp_body = t.object
    return HttpRequestDescription(
        subject=subject, triples=tuple(group), method_name=method,
        request_uri=uri, body=body, headers=tuple(headers),
        response=resp, response_body=resp_body)


# ---------------------------------------------------------------------------
# Request extraction from proofs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractedRequest:
    request: HttpRequestDescription
    sufficiently_specified: bool
    step: str              # the Inference step the request was instantiated by
    rule_source: str


def extract_requests(proof: Proof, rules: Sequence[RestDescription]) -> List[ExtractedRequest]:
    """Instantiated requests, one per description-rule inference, in
    dependency order (evidence before dependents)."""
    by_source = {r.source: r for r in rules}
    out: List[ExtractedRequest] = []
    for ident in proof.topological_order():
        step = proof.steps[ident]
        if step.kind != "Inference":
            continue
        src = reason.rule_source_of_inference(proof, step)
        if src not in by_source:
            continue
        subject = _request_subject(step.gives)
        if subject is None:
            continue
        request = parse_request(step.gives, subject)
        out.append(ExtractedRequest(request, request.sufficiently_specified, ident, src))
    return out


def _request_subject(formula: Formula) -> Optional[Term]:
    for t in formula.atoms:
        if t.predicate == METHOD_NAME:
            return t.subject
    return None


# ---------------------------------------------------------------------------
# Wire conversion
# ---------------------------------------------------------------------------

def to_wire_request(h: HttpRequestDescription) -> WireRequest:
    if not h.sufficiently_specified:
        raise NotSufficientlySpecified(f"request {h.subject!r} still has variable holes")
    if not isinstance(h.method_name, Literal):
        raise NotSufficientlySpecified(f"method is not a literal: {h.method_name!r}")
    method = h.method_name.lexical
    if isinstance(h.request_uri, Literal):
        target = h.request_uri.lexical
    elif isinstance(h.request_uri, Uri):
        target = h.request_uri.value
    else:
        raise NotSufficientlySpecified(f"request URI is not concrete: {h.request_uri!r}")
    body_ref = body_inline = None
    if isinstance(h.body, Uri):
        body_ref = h.body.value
    elif isinstance(h.body, Literal):
        body_inline = h.body.lexical
    elif h.body is not None:
        raise NotSufficientlySpecified(f"body is not concrete: {h.body!r}")
    headers = tuple(("", _plain(t)) for t in h.headers)
    return WireRequest(method=method, target=target, body_ref=body_ref,
                       body_inline=body_inline, headers=headers)


def _plain(term: Term) -> str:
    if isinstance(term, Literal):
        return term.lexical
    if isinstance(term, Uri):
        return term.value
    return repr(term)

"""Semi-automated description generation: cluster observed HTTP
responses by string similarity, generalize the varying constants into
placeholder variables, and emit description skeletons for a human to
refine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import n3
from .n3 import (
    Document, ExistentialVar, Formula, GraphTerm, Implication, Literal,
    Term, Triple, UniversalVar, Uri, _term_key,
)
from .restdesc import BODY, HTTP_NS, METHOD_NAME, REQUEST_URI, RESP, WireRequest
from .simulator import WireResponse

LOCAL_NS = "http://example.org/local#"
LOCAL_FILE = Uri(LOCAL_NS + "localFile")

DEFAULT_THRESHOLD = 0.6


class DescGenError(Exception):
    pass


class EmptyCluster(DescGenError):
    pass


@dataclass(frozen=True)
class TraceEntry:
    request: WireRequest
    response: WireResponse


@dataclass
class Cluster:
    members: List[int]            # indices into the trace, ascending
    method: str


@dataclass
class Skeleton:
    document: Document
    cluster: int
    generalized: Dict[str, List[str]] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Trace input
# ---------------------------------------------------------------------------

_REQUEST_LINE = re.compile(
    r"HTTP request\s*\d*:\s*(\w+)\s+to\s+(\S+?)(?:\s+with\s+(\S+)\s+as body)?\s*$",
    re.MULTILINE)
_RESPONSE_LINE = re.compile(r"HTTP response\s*\d*:\s*$")


def parse_trace(text: str) -> List[TraceEntry]:
    """Reads either the delimited text format (request/response blocks)
    or an N3 document using the http: vocabulary."""
    if _REQUEST_LINE.search(text):
        return _parse_delimited(text)
    return _parse_n3_trace(text)


def _parse_delimited(text: str) -> List[TraceEntry]:
    entries: List[TraceEntry] = []
    current: Optional[WireRequest] = None
    body_lines: List[str] = []

    def flush():
        nonlocal current, body_lines
        if current is not None:
            entries.append(TraceEntry(current, WireResponse(
                status=200, body="\n".join(body_lines).strip() + "\n")))
        current, body_lines = None, []

    for line in text.splitlines():
        m = _REQUEST_LINE.match(line.strip())
        if m:
            flush()
            method, target, body_ref = m.groups()
            current = WireRequest(method=method, target=target, body_ref=body_ref)
            continue
        if _RESPONSE_LINE.match(line.strip()):
            continue
        body_lines.append(line)
    flush()
    if not entries:
        raise DescGenError("trace contains no requests")
    return entries


def _parse_n3_trace(text: str) -> List[TraceEntry]:
    try:
        doc = n3.parse_document(text)
    except n3.ParseError as exc:
        raise DescGenError(f"trace is neither delimited text nor N3: {exc}")
    by_subject: Dict[tuple, List[Triple]] = {}
    for t in doc.body.atoms:
        by_subject.setdefault(_term_key(t.subject), []).append(t)

    def obj(subject: Term, pred: Uri) -> Optional[Term]:
        for t in by_subject.get(_term_key(subject), []):
            if t.predicate == pred:
                return t.object
        return None

    entries: List[TraceEntry] = []
    seen = set()
    for t in doc.body.atoms:
        if t.predicate != METHOD_NAME or _term_key(t.subject) in seen:
            continue
        seen.add(_term_key(t.subject))
        subject = t.subject
        method = t.object.lexical if isinstance(t.object, Literal) else str(t.object)
        uri = obj(subject, REQUEST_URI)
        target = uri.lexical if isinstance(uri, Literal) else uri.value if isinstance(uri, Uri) else ""
        body = obj(subject, BODY)
        body_ref = body.value if isinstance(body, Uri) else None
        resp = obj(subject, RESP)
        resp_body = obj(resp, BODY) if resp is not None else None
        body_text = resp_body.lexical if isinstance(resp_body, Literal) else ""
        entries.append(TraceEntry(
            WireRequest(method=method, target=target, body_ref=body_ref),
            WireResponse(status=200, body=body_text)))
    if not entries:
        raise DescGenError("trace contains no requests")
    return entries


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------

def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def canonical_body(body: str) -> str:
    """Prefixes expanded, triples sorted; unparseable bodies are compared
    as raw text."""
    try:
        doc = n3.parse_document(body)
    except n3.ParseError:
        return body.strip()
    lines = sorted(n3.serialize_formula(doc.body, prefixes={}))
    return "\n".join(lines)


def cluster_responses(trace: Sequence[TraceEntry],
                      threshold: float = DEFAULT_THRESHOLD) -> List[Cluster]:
    """Single-linkage agglomeration: connected components of the pairs
    with similarity >= threshold; members always share the method."""
    if not trace:
        raise DescGenError("empty trace")
    bodies = [canonical_body(e.response.body) for e in trace]
    parent = list(range(len(trace)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(len(trace)):
        for j in range(i + 1, len(trace)):
            if trace[i].request.method != trace[j].request.method:
                continue
            if similarity(bodies[i], bodies[j]) >= threshold:
                parent[find(j)] = find(i)

    groups: Dict[int, List[int]] = {}
    for i in range(len(trace)):
        groups.setdefault(find(i), []).append(i)
    clusters = [Cluster(sorted(members), trace[members[0]].request.method)
                for members in groups.values()]
    clusters.sort(key=lambda c: c.members[0])
    return clusters


# ---------------------------------------------------------------------------
# Skeleton generation
# ---------------------------------------------------------------------------

class _Placeholder:
    def __init__(self, index: int, values: Tuple[Term, ...]):
        self.index = index
        self.values = values
        self.universal = False     # promoted when bound in the antecedent

    def term(self) -> Term:
        name = f"object{self.index}"
        return UniversalVar(name) if self.universal else ExistentialVar(name)


class _Generalizer:
    """Maps cross-member value tuples to shared numbered placeholders."""

    def __init__(self):
        self.by_key: Dict[tuple, _Placeholder] = {}
        self.order: List[_Placeholder] = []

    def resolve(self, values: Sequence[Term]) -> Term:
        values = tuple(values)
        if all(v == values[0] for v in values):
            return values[0]
        key = tuple(_term_key(v) for v in values)
        if key not in self.by_key:
            ph = _Placeholder(len(self.by_key) + 1, values)
            self.by_key[key] = ph
            self.order.append(ph)
        return self.by_key[key]

    def lookup(self, values: Sequence[Term]) -> Optional[_Placeholder]:
        return self.by_key.get(tuple(_term_key(v) for v in values))


def generate_skeletons(clusters: Sequence[Cluster],
                       trace: Sequence[TraceEntry]) -> List[Skeleton]:
    return [_skeleton_for(idx, c, trace) for idx, c in enumerate(clusters)]


def _skeleton_for(idx: int, cluster: Cluster, trace: Sequence[TraceEntry]) -> Skeleton:
    if not cluster.members:
        raise EmptyCluster(f"cluster {idx} has no members")
    members = [trace[i] for i in cluster.members]
    notes: List[str] = []
    docs = []
    for entry in members:
        try:
            docs.append(n3.parse_document(entry.response.body))
        except n3.ParseError as exc:
            notes.append(f"unparseable response body skipped: {exc}")
            docs.append(Document(prefixes={}, body=Formula()))
    depth = min(len(d.body.atoms) for d in docs)
    if any(len(d.body.atoms) != depth for d in docs):
        notes.append("responses differ in length; generalizing the common prefix")

    gen = _Generalizer()
    method = cluster.method

    # request part, placeholders numbered by first use
    uri_slot = _request_uri_slot(gen, members)
    body_slot = None
    if any(e.request.body_ref for e in members):
        body_slot = gen.resolve([Uri(e.request.body_ref or "") for e in members])

    # response part: align triples by document position
    proto_triples: List[Tuple[object, object, object]] = []
    for pos in range(depth):
        triples = [d.body.atoms[pos] for d in docs]
        proto_triples.append((
            gen.resolve([t.subject for t in triples]),
            gen.resolve([t.predicate for t in triples]),
            gen.resolve([t.object for t in triples]),
        ))

    # GET responses describe the requested resource itself; POST responses
    # describe a server-created one, identified by the response subject
    if method == "GET":
        resp_body_slot = uri_slot
    else:
        resp_body_slot = proto_triples[0][0] if proto_triples else ExistentialVar("object0")

    antecedent_protos: List[Tuple[object, object, object]] = []
    if isinstance(body_slot, _Placeholder):
        body_slot.universal = True
        antecedent_protos.append((body_slot, Uri(n3.RDF_TYPE), LOCAL_FILE))
    if isinstance(uri_slot, _Placeholder):
        linked = _link_request_uri(uri_slot, gen, cluster, trace)
        if linked is not None:
            antecedent_protos.append(linked)

    request_var = ExistentialVar("request")
    response_var = ExistentialVar("response")
    consequent_protos = [
        (request_var, METHOD_NAME, Literal(method)),
        (request_var, REQUEST_URI, uri_slot),
    ]
    if body_slot is not None:
        consequent_protos.append((request_var, BODY, body_slot))
    consequent_protos.append((request_var, RESP, response_var))
    consequent_protos.append((response_var, BODY, resp_body_slot))
    consequent_protos.extend(proto_triples)

    antecedent = Formula([_materialize(p) for p in antecedent_protos])
    consequent = Formula([_materialize(p) for p in consequent_protos])
    imp = Implication(GraphTerm(antecedent), GraphTerm(consequent))
    prefixes = dict(docs[0].prefixes)
    prefixes.setdefault("http", HTTP_NS)
    prefixes.setdefault("", LOCAL_NS)
    doc = Document(prefixes=prefixes, body=Formula((), (imp,)))

    generalized = {f"object{ph.index}": [_plain_value(v) for v in ph.values]
                   for ph in gen.order}
    return Skeleton(document=doc, cluster=idx, generalized=generalized, notes=notes)


def _request_uri_slot(gen: _Generalizer, members: Sequence[TraceEntry]):
    values = []
    for e in members:
        target = e.request.target
        # bare paths that also occur as link objects compare as URIs
        values.append(Uri(target) if target.startswith("/") and target != "/"
                      and not target.endswith("/") else Literal(target))
    constant = all(v == values[0] for v in values)
    if constant:
        return values[0]
    return gen.resolve(values)


def _link_request_uri(slot: _Placeholder, gen: _Generalizer, cluster: Cluster,
                      trace: Sequence[TraceEntry]):
    """The linking step: when the concrete request URIs were already
    mentioned in earlier responses, lift the mentioning pattern into the
    antecedent with shared variable names."""
    found: List[Triple] = []
    for member_pos, trace_idx in enumerate(cluster.members):
        value = slot.values[member_pos]
        hit = None
        for earlier in range(trace_idx):
            if earlier in cluster.members:
                continue
            try:
                doc = n3.parse_document(trace[earlier].response.body)
            except n3.ParseError:
                continue
            for t in doc.body.atoms:
                if value in (t.subject, t.object):
                    hit = t
                    break
            if hit:
                break
        if hit is None:
            return None
        found.append(hit)
    predicates = {f.predicate for f in found}
    if len(predicates) != 1:
        return None
    slot.universal = True
    subject = gen.resolve([f.subject for f in found])
    obj = gen.resolve([f.object for f in found])
    for part in (subject, obj):
        if isinstance(part, _Placeholder):
            part.universal = True
    return (subject, found[0].predicate, obj)


def _materialize(proto) -> Triple:
    def conv(x):
        return x.term() if isinstance(x, _Placeholder) else x
    return Triple(conv(proto[0]), conv(proto[1]), conv(proto[2]))


def _plain_value(term: Term) -> str:
    if isinstance(term, Literal):
        return term.lexical
    if isinstance(term, Uri):
        return term.value
    return repr(term)

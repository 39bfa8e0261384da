"""Core N3 subset: terms, formulas, lexing, parsing, serialization, and
term-level algebra (components, substitutions, classification).

The supported language is the fragment needed for hypermedia API
descriptions: triples, conjunctions, implications between graph terms,
quoted strings, integers and decimals, lists, blank-node shortcuts, and
implicit quantification (``?x`` universal, ``_:x`` existential).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union
from urllib.parse import urljoin

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD_INTEGER = "http://www.w3.org/2001/XMLSchema#integer"
XSD_DECIMAL = "http://www.w3.org/2001/XMLSchema#decimal"


class N3Error(Exception):
    """Base error for this module."""


class ParseError(N3Error):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Uri:
    value: str

    def __repr__(self) -> str:
        return f"<{self.value}>"


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: Optional[str] = None

    def __repr__(self) -> str:
        if self.datatype in (XSD_INTEGER, XSD_DECIMAL):
            return self.lexical
        return f'"{self.lexical}"' + (f"^^<{self.datatype}>" if self.datatype else "")


@dataclass(frozen=True)
class UniversalVar:
    name: str

    def __post_init__(self):
        if not self.name:
            raise N3Error("variable name must be nonempty")

    def __repr__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class ExistentialVar:
    name: str

    def __post_init__(self):
        if not self.name:
            raise N3Error("variable name must be nonempty")

    def __repr__(self) -> str:
        return f"_:{self.name}"


@dataclass(frozen=True)
class ListTerm:
    items: Tuple["Term", ...]

    def __repr__(self) -> str:
        return "(" + " ".join(repr(i) for i in self.items) + ")"


class _FalseTerm:
    """The boolean ``false`` constant; a single shared instance."""

    _instance: Optional["_FalseTerm"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "false"


FALSE = _FalseTerm()


class GraphTerm:
    """A formula wrapped in braces, usable as a term."""

    __slots__ = ("formula",)

    def __init__(self, formula: "Formula"):
        self.formula = formula

    def __eq__(self, other) -> bool:
        return isinstance(other, GraphTerm) and self.formula == other.formula

    def __hash__(self) -> int:
        return hash(("graph", self.formula))

    def __repr__(self) -> str:
        return "{" + repr(self.formula) + "}"


Term = Union[Uri, Literal, UniversalVar, ExistentialVar, ListTerm, GraphTerm, _FalseTerm]


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def terms(self) -> Tuple[Term, Term, Term]:
        return (self.subject, self.predicate, self.object)

    def __repr__(self) -> str:
        return f"{self.subject!r} {self.predicate!r} {self.object!r}."


@dataclass(frozen=True)
class Implication:
    antecedent: Union[GraphTerm, _FalseTerm]
    consequent: Union[GraphTerm, _FalseTerm]

    def __repr__(self) -> str:
        return f"{self.antecedent!r} => {self.consequent!r}."


class Formula:
    """A conjunction of atomic triples and implications.

    Equality treats both member collections as multisets; the original
    order is retained for serialization stability.
    """

    __slots__ = ("atoms", "implications", "_key")

    def __init__(self, atoms: Iterable[Triple] = (), implications: Iterable[Implication] = ()):
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "implications", tuple(implications))
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("Formula is immutable")

    def __copy__(self) -> "Formula":
        return self

    def __deepcopy__(self, memo) -> "Formula":
        return self

    def _canonical_key(self):
        if self._key is None:
            key = (
                tuple(sorted(_term_key(t) for t in self.atoms)),
                tuple(sorted((_term_key(i.antecedent), _term_key(i.consequent)) for i in self.implications)),
            )
            object.__setattr__(self, "_key", key)
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, Formula) and self._canonical_key() == other._canonical_key()

    def __hash__(self) -> int:
        return hash(self._canonical_key())

    def __bool__(self) -> bool:
        return bool(self.atoms or self.implications)

    def __repr__(self) -> str:
        parts = [repr(a) for a in self.atoms] + [repr(i) for i in self.implications]
        return " ".join(parts)

    def members(self) -> Iterator[Union[Triple, Implication]]:
        yield from self.atoms
        yield from self.implications

    def conjoin(self, other: "Formula") -> "Formula":
        return Formula(self.atoms + other.atoms, self.implications + other.implications)


EMPTY_FORMULA = Formula()


def _term_key(term) -> tuple:
    """A hashable, orderable key for any term (or triple)."""
    if isinstance(term, Uri):
        return ("uri", term.value)
    if isinstance(term, Literal):
        return ("lit", term.lexical, term.datatype or "")
    if isinstance(term, UniversalVar):
        return ("uvar", term.name)
    if isinstance(term, ExistentialVar):
        return ("evar", term.name)
    if isinstance(term, ListTerm):
        return ("list",) + tuple(_term_key(i) for i in term.items)
    if isinstance(term, _FalseTerm):
        return ("false",)
    if isinstance(term, GraphTerm):
        return ("graph", term.formula._canonical_key())
    if isinstance(term, Triple):
        return ("triple", _term_key(term.subject), _term_key(term.predicate), _term_key(term.object))
    raise TypeError(f"not a term: {term!r}")


@dataclass
class Document:
    prefixes: Dict[str, str]
    body: Formula
    base: Optional[str] = None


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<WS>\s+)
    | (?P<COMMENT>\#[^\n]*)
    | (?P<PREFIX>@prefix\b)
    | (?P<BASEDECL>@base\b)
    | (?P<IRIREF><[^<>"{}|^`\\\s]*>)
    | (?P<IMPLIES>=>)
    | (?P<STRING>"(?:[^"\\]|\\.)*")
    | (?P<DTYPE>\^\^)
    | (?P<NUMBER>[+-]?[0-9]+(?:\.[0-9]+)?)
    | (?P<BNODE>_:[A-Za-z0-9_\-]+)
    | (?P<UVAR>\?[A-Za-z0-9_\-]+)
    | (?P<PNAME>[A-Za-z0-9_\-]*:[A-Za-z0-9_\-]*)
    | (?P<KEYWORD>\b(?:a|false|true)\b)
    | (?P<PUNCT>[.;,\[\](){}])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    column: int


def _lex(text: str) -> List[_Tok]:
    tokens: List[_Tok] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup or ""
        raw = m.group()
        if kind not in ("WS", "COMMENT"):
            tokens.append(_Tok(kind, raw, line, m.start() - line_start + 1))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + raw.rfind("\n") + 1
        pos = m.end()
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _FormulaBuilder:
    def __init__(self):
        self.atoms: List[Triple] = []
        self.implications: List[Implication] = []

    def build(self) -> Formula:
        return Formula(self.atoms, self.implications)


class _Parser:
    def __init__(self, tokens: List[_Tok], base: Optional[str]):
        self.tokens = tokens
        self.pos = 0
        self.base = base
        self.prefixes: Dict[str, str] = {}
        self.bnode_counter = 0
        self.stack: List[_FormulaBuilder] = []

    # -- token plumbing -----------------------------------------------------

    def _peek(self) -> Optional[_Tok]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self) -> _Tok:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Tok("", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.column)
        self.pos += 1
        return tok

    def _expect(self, text: str) -> _Tok:
        tok = self._next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.column)
        return tok

    def _fresh_existential(self) -> ExistentialVar:
        var = ExistentialVar(f"b{self.bnode_counter}")
        self.bnode_counter += 1
        return var

    # -- entry point --------------------------------------------------------

    def parse_document(self) -> Document:
        builder = _FormulaBuilder()
        self.stack.append(builder)
        while self._peek() is not None:
            tok = self._peek()
            if tok.kind == "PREFIX":
                self._parse_prefix()
            elif tok.kind == "BASEDECL":
                self._parse_base()
            else:
                self._parse_statement()
        self.stack.pop()
        return Document(prefixes=dict(self.prefixes), body=builder.build(), base=self.base)

    def _parse_prefix(self):
        self._next()
        tok = self._next()
        if tok.kind != "PNAME" or not tok.text.endswith(":"):
            raise ParseError("expected prefix label", tok.line, tok.column)
        label = tok.text[:-1]
        iri_tok = self._next()
        if iri_tok.kind != "IRIREF":
            raise ParseError("expected IRI in @prefix", iri_tok.line, iri_tok.column)
        self.prefixes[label] = self._resolve(iri_tok.text[1:-1])
        self._expect(".")

    def _parse_base(self):
        self._next()
        iri_tok = self._next()
        if iri_tok.kind != "IRIREF":
            raise ParseError("expected IRI in @base", iri_tok.line, iri_tok.column)
        self.base = self._resolve(iri_tok.text[1:-1])
        self._expect(".")

    def _resolve(self, iri: str) -> str:
        if self.base and not re.match(r"^[A-Za-z][A-Za-z0-9+.\-]*:", iri):
            return urljoin(self.base, iri)
        return iri

    # -- statements ---------------------------------------------------------

    def _parse_statement(self):
        subject = self._parse_term()
        tok = self._peek()
        if tok is not None and tok.kind == "IMPLIES":
            self._next()
            consequent = self._parse_term()
            self._add_implication(subject, consequent)
            self._expect(".")
            return
        self._parse_predicate_object_list(subject)
        self._expect(".")

    def _add_implication(self, antecedent: Term, consequent: Term):
        for side, name in ((antecedent, "antecedent"), (consequent, "consequent")):
            if not isinstance(side, (GraphTerm, _FalseTerm)):
                raise N3Error(f"implication {name} must be a graph term or false")
        self.stack[-1].implications.append(Implication(antecedent, consequent))

    def _parse_predicate_object_list(self, subject: Term):
        while True:
            predicate = self._parse_predicate()
            while True:
                obj = self._parse_term()
                self.stack[-1].atoms.append(Triple(subject, predicate, obj))
                tok = self._peek()
                if tok is not None and tok.text == ",":
                    self._next()
                    continue
                break
            tok = self._peek()
            if tok is not None and tok.text == ";":
                self._next()
                # allow trailing semicolon before '.' or ']'
                nxt = self._peek()
                if nxt is not None and nxt.text in (".", "]"):
                    break
                continue
            break

    def _parse_predicate(self) -> Term:
        tok = self._peek()
        if tok is not None and tok.kind == "KEYWORD" and tok.text == "a":
            self._next()
            return Uri(RDF_TYPE)
        return self._parse_term()

    # -- terms --------------------------------------------------------------

    def _parse_term(self) -> Term:
        tok = self._next()
        if tok.kind == "IRIREF":
            return Uri(self._resolve(tok.text[1:-1]))
        if tok.kind == "PNAME":
            return self._expand_pname(tok)
        if tok.kind == "BNODE":
            return ExistentialVar(tok.text[2:])
        if tok.kind == "UVAR":
            return UniversalVar(tok.text[1:])
        if tok.kind == "STRING":
            return self._finish_literal(tok)
        if tok.kind == "NUMBER":
            datatype = XSD_DECIMAL if "." in tok.text else XSD_INTEGER
            return Literal(tok.text, datatype)
        if tok.kind == "KEYWORD":
            if tok.text == "a":
                return Uri(RDF_TYPE)
            if tok.text == "false":
                return FALSE
            if tok.text == "true":
                return Literal("true", "http://www.w3.org/2001/XMLSchema#boolean")
        if tok.text == "(":
            items = []
            while True:
                nxt = self._peek()
                if nxt is None:
                    raise ParseError("unterminated list", tok.line, tok.column)
                if nxt.text == ")":
                    self._next()
                    return ListTerm(tuple(items))
                items.append(self._parse_term())
        if tok.text == "[":
            var = self._fresh_existential()
            nxt = self._peek()
            if nxt is not None and nxt.text == "]":
                self._next()
                return var
            self._parse_predicate_object_list(var)
            self._expect("]")
            return var
        if tok.text == "{":
            builder = _FormulaBuilder()
            self.stack.append(builder)
            while True:
                nxt = self._peek()
                if nxt is None:
                    raise ParseError("unterminated graph term", tok.line, tok.column)
                if nxt.text == "}":
                    self._next()
                    break
                self._parse_statement()
            self.stack.pop()
            return GraphTerm(builder.build())
        raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.column)

    def _expand_pname(self, tok: _Tok) -> Uri:
        label, _, local = tok.text.partition(":")
        if label not in self.prefixes:
            raise ParseError(f"unresolved prefix {label!r}", tok.line, tok.column)
        return Uri(self.prefixes[label] + local)

    def _finish_literal(self, tok: _Tok) -> Literal:
        lexical = _unescape_string(tok.text[1:-1])
        nxt = self._peek()
        if nxt is not None and nxt.kind == "DTYPE":
            self._next()
            dtype_tok = self._next()
            if dtype_tok.kind == "IRIREF":
                return Literal(lexical, self._resolve(dtype_tok.text[1:-1]))
            if dtype_tok.kind == "PNAME":
                return Literal(lexical, self._expand_pname(dtype_tok).value)
            raise ParseError("expected datatype IRI after ^^", dtype_tok.line, dtype_tok.column)
        return Literal(lexical)


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


def _unescape_string(raw: str) -> str:
    out = []
    i = 0
    while i < len(raw):
        c = raw[i]
        if c == "\\" and i + 1 < len(raw):
            out.append(_ESCAPES.get(raw[i + 1], raw[i + 1]))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _escape_string(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")


def parse_document(text: str, base: Optional[str] = None) -> Document:
    """Parse an N3-subset document; all shortcuts are desugared."""
    parser = _Parser(_lex(text), base)
    return parser.parse_document()


def parse_formula(text: str, prefixes: Optional[Dict[str, str]] = None) -> Formula:
    """Convenience wrapper: parse a body-only snippet with given prefixes."""
    header = ""
    if prefixes:
        header = "".join(f"@prefix {label}: <{iri}>.\n" for label, iri in prefixes.items())
    return parse_document(header + text).body


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def serialize(doc: Document) -> str:
    """Emit the document back as N3 text; parse(serialize(d)) == d."""
    out: List[str] = []
    for label in sorted(doc.prefixes):
        out.append(f"@prefix {label}: <{doc.prefixes[label]}>.")
    if doc.prefixes and doc.body:
        out.append("")
    out.extend(serialize_formula(doc.body, doc.prefixes))
    return "\n".join(out) + ("\n" if out else "")


def serialize_formula(formula: Formula, prefixes: Optional[Dict[str, str]] = None,
                      indent: str = "") -> List[str]:
    prefixes = prefixes or {}
    lines: List[str] = []
    for member in formula.members():
        lines.extend(_serialize_member(member, prefixes, indent))
    return lines


def _serialize_member(member, prefixes: Dict[str, str], indent: str) -> List[str]:
    if isinstance(member, Triple):
        s = _serialize_term(member.subject, prefixes, indent)
        p = _serialize_term(member.predicate, prefixes, indent)
        o = _serialize_term(member.object, prefixes, indent)
        return [f"{indent}{s} {p} {o}."]
    ant = _serialize_term(member.antecedent, prefixes, indent)
    con = _serialize_term(member.consequent, prefixes, indent)
    return [f"{indent}{ant} => {con}."]


def _serialize_term(term: Term, prefixes: Dict[str, str], indent: str = "") -> str:
    if isinstance(term, Uri):
        if term.value == RDF_TYPE:
            return "a"
        for label, iri in sorted(prefixes.items(), key=lambda kv: -len(kv[1])):
            if term.value.startswith(iri):
                local = term.value[len(iri):]
                if re.fullmatch(r"[A-Za-z0-9_\-]*", local):
                    return f"{label}:{local}"
        return f"<{term.value}>"
    if isinstance(term, Literal):
        if term.datatype in (XSD_INTEGER, XSD_DECIMAL):
            return term.lexical
        base = f'"{_escape_string(term.lexical)}"'
        if term.datatype:
            return base + "^^" + _serialize_term(Uri(term.datatype), prefixes)
        return base
    if isinstance(term, UniversalVar):
        return f"?{term.name}"
    if isinstance(term, ExistentialVar):
        return f"_:{term.name}"
    if isinstance(term, ListTerm):
        return "(" + " ".join(_serialize_term(i, prefixes, indent) for i in term.items) + ")"
    if isinstance(term, _FalseTerm):
        return "false"
    if isinstance(term, GraphTerm):
        inner = serialize_formula(term.formula, prefixes, indent + "  ")
        if not inner:
            return "{ }"
        return "{\n" + "\n".join(inner) + f"\n{indent}" + "}"
    raise TypeError(f"not a term: {term!r}")


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------

def _c(expr: Term) -> Iterator[Term]:
    """Auxiliary list-flattening function over expressions."""
    if isinstance(expr, ListTerm):
        for item in expr.items:
            yield from _c(item)
    else:
        yield expr


def direct_components(formula: Formula) -> List[Term]:
    """Direct components, in first-occurrence order (set semantics by key)."""
    seen = set()
    out: List[Term] = []

    def add(term: Term):
        key = _term_key(term)
        if key not in seen:
            seen.add(key)
            out.append(term)

    for atom in formula.atoms:
        for pos in atom.terms():
            for expr in _c(pos):
                add(expr)
    for imp in formula.implications:
        add(imp.antecedent)
        add(imp.consequent)
    return out


def components(formula: Formula, level: int) -> List[Term]:
    """Components of the given nesting level (level 1 = direct)."""
    if level < 1:
        raise ValueError("level must be positive")
    if level == 1:
        return direct_components(formula)
    seen = set()
    out: List[Term] = []
    for comp in direct_components(formula):
        if isinstance(comp, GraphTerm):
            for nested in components(comp.formula, level - 1):
                key = _term_key(nested)
                if key not in seen:
                    seen.add(key)
                    out.append(nested)
    return out


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

class Substitution:
    """A finite map from variables to terms."""

    def __init__(self, pairs: Dict[Term, Term]):
        for var, value in pairs.items():
            if not isinstance(var, (UniversalVar, ExistentialVar)):
                raise N3Error(f"substitution key must be a variable: {var!r}")
            if var == value:
                raise N3Error(f"variable must not map to itself: {var!r}")
        self.pairs = dict(pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def get(self, term: Term) -> Optional[Term]:
        return self.pairs.get(term)

    def items(self):
        return self.pairs.items()


def _replace_shallow(term: Term, sub: Substitution) -> Term:
    """Replace variables at direct-component positions (descends into lists only)."""
    if isinstance(term, (UniversalVar, ExistentialVar)):
        return sub.get(term) or term
    if isinstance(term, ListTerm):
        return ListTerm(tuple(_replace_shallow(i, sub) for i in term.items))
    return term


def _replace_deep(term: Term, sub: Substitution) -> Term:
    if isinstance(term, (UniversalVar, ExistentialVar)):
        return sub.get(term) or term
    if isinstance(term, ListTerm):
        return ListTerm(tuple(_replace_deep(i, sub) for i in term.items))
    if isinstance(term, GraphTerm):
        return GraphTerm(apply_substitution(term.formula, sub, mode="total"))
    return term


def apply_substitution(formula: Formula, sub: Substitution, mode: str = "total") -> Formula:
    """Apply a substitution; ``component`` touches direct components only,
    ``total`` replaces at every nesting depth."""
    if mode not in ("component", "total"):
        raise ValueError(f"unknown mode {mode!r}")
    replace = _replace_shallow if mode == "component" else _replace_deep
    atoms = [Triple(*(replace(t, sub) for t in atom.terms())) for atom in formula.atoms]
    implications = []
    for imp in formula.implications:
        if mode == "component":
            implications.append(imp)
        else:
            ant = _replace_deep(imp.antecedent, sub)
            con = _replace_deep(imp.consequent, sub)
            implications.append(Implication(ant, con))
    return Formula(atoms, implications)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def iter_variables(formula: Formula) -> Iterator[Union[UniversalVar, ExistentialVar]]:
    """All variable occurrences at any depth, in document order (with repeats)."""

    def walk_term(term: Term) -> Iterator[Union[UniversalVar, ExistentialVar]]:
        if isinstance(term, (UniversalVar, ExistentialVar)):
            yield term
        elif isinstance(term, ListTerm):
            for item in term.items:
                yield from walk_term(item)
        elif isinstance(term, GraphTerm):
            yield from iter_variables(term.formula)

    for atom in formula.atoms:
        for pos in atom.terms():
            yield from walk_term(pos)
    for imp in formula.implications:
        yield from walk_term(imp.antecedent)
        yield from walk_term(imp.consequent)


def variables_in_order(formula: Formula) -> List[Union[UniversalVar, ExistentialVar]]:
    """Distinct variables in first-occurrence order."""
    seen = set()
    out = []
    for var in iter_variables(formula):
        if var not in seen:
            seen.add(var)
            out.append(var)
    return out


@dataclass(frozen=True)
class Classification:
    ground: bool
    universal_free: bool
    simple: bool


def is_ground(formula: Formula) -> bool:
    return next(iter_variables(formula), None) is None


def term_is_ground(term: Term) -> bool:
    if isinstance(term, (UniversalVar, ExistentialVar)):
        return False
    if isinstance(term, ListTerm):
        return all(term_is_ground(i) for i in term.items)
    if isinstance(term, GraphTerm):
        return is_ground(term.formula)
    return True


def classify(formula: Formula) -> Classification:
    ground = True
    universal_free = True
    for var in iter_variables(formula):
        ground = False
        if isinstance(var, UniversalVar):
            universal_free = False
            break
    # comp^3 empty implies comp^n empty for every n > 2
    simple = not components(formula, 3)
    return Classification(ground=ground, universal_free=universal_free, simple=simple)


# ---------------------------------------------------------------------------
# Structural equality up to variable renaming
# ---------------------------------------------------------------------------

def formulas_isomorphic(left: Formula, right: Formula) -> bool:
    """True when the formulas are equal up to a bijective renaming of
    variables (universals map to universals, existentials to existentials)."""
    return _match_formulas(left, right, {}, {})


def _match_formulas(left: Formula, right: Formula, fwd: Dict[str, tuple], bwd: Dict[tuple, str]) -> bool:
    if len(left.atoms) != len(right.atoms) or len(left.implications) != len(right.implications):
        return False
    return _match_members(list(left.members()), list(right.members()), fwd, bwd)


def _match_members(left: list, right: list, fwd: dict, bwd: dict) -> bool:
    if not left:
        return True
    head, rest = left[0], left[1:]
    for idx, candidate in enumerate(right):
        trial_fwd, trial_bwd = dict(fwd), dict(bwd)
        if _match_member(head, candidate, trial_fwd, trial_bwd):
            if _match_members(rest, right[:idx] + right[idx + 1:], trial_fwd, trial_bwd):
                fwd.clear(); fwd.update(trial_fwd)
                bwd.clear(); bwd.update(trial_bwd)
                return True
    return False


def _match_member(left, right, fwd, bwd) -> bool:
    if isinstance(left, Triple) and isinstance(right, Triple):
        return all(_match_terms(a, b, fwd, bwd) for a, b in zip(left.terms(), right.terms()))
    if isinstance(left, Implication) and isinstance(right, Implication):
        return (_match_terms(left.antecedent, right.antecedent, fwd, bwd)
                and _match_terms(left.consequent, right.consequent, fwd, bwd))
    return False


def _match_terms(left: Term, right: Term, fwd, bwd) -> bool:
    if isinstance(left, UniversalVar) or isinstance(left, ExistentialVar):
        if type(left) is not type(right):
            return False
        lkey, rkey = ("u" if isinstance(left, UniversalVar) else "e") + left.name, _term_key(right)
        if lkey in fwd:
            return fwd[lkey] == rkey
        if rkey in bwd:
            return False
        fwd[lkey] = rkey
        bwd[rkey] = lkey
        return True
    if isinstance(left, ListTerm) and isinstance(right, ListTerm):
        return len(left.items) == len(right.items) and all(
            _match_terms(a, b, fwd, bwd) for a, b in zip(left.items, right.items))
    if isinstance(left, GraphTerm) and isinstance(right, GraphTerm):
        return _match_formulas(left.formula, right.formula, fwd, bwd)
    return left == right

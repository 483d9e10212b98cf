"""Embedded in-memory triple store with a parser/evaluator for the SPARQL
subset the engine generates.

Supported grammar (everything else is rejected with a positioned error):

    Query      :=  Prologue (SelectQuery | InsertData)
    Prologue   :=  ("PREFIX" PNAME ":" IRIREF)*
    SelectQuery:=  "SELECT" ("*" | Var+) "WHERE" "{" Block "}" ("LIMIT" INT)?
    Block      :=  (TriplePattern "." | Filter)*
    Filter     :=  "FILTER" "regex" "(" Var "," String ("," String)? ")"
    InsertData :=  "INSERT" "DATA" "{" (GroundTriple ".")* "}"
    Term       :=  IRIREF | PNAME ":" local | Var | String (LANGTAG | "^^" IRIREF)?

SELECT evaluation is a pattern-ordered nested-loop join with binding
propagation; rows are sorted by their binding tuple before LIMIT, so results
are deterministic regardless of store iteration order.  INSERT DATA has set
semantics.  Long evaluations run over an immutable snapshot of the store.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass

from .errors import FormMismatch, ParseError


@dataclass(frozen=True)
class Uri:
    value: str


@dataclass(frozen=True)
class Literal:
    text: str
    lang: str | None = None
    datatype: str | None = None


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Triple:
    subject: Uri
    predicate: Uri
    object: Uri | Literal

    def __post_init__(self):
        if not isinstance(self.subject, Uri) or not isinstance(self.predicate, Uri):
            raise ValueError("triple subject and predicate must be uris")


@dataclass(frozen=True)
class TriplePattern:
    subject: Uri | Literal | Var
    predicate: Uri | Literal | Var
    object: Uri | Literal | Var

    def terms(self):
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class RegexFilter:
    var: Var
    pattern: str
    ignore_case: bool = False


@dataclass(frozen=True)
class SelectQuery:
    variables: tuple[Var, ...] | None  # None means SELECT *
    patterns: tuple[TriplePattern, ...]
    filters: tuple[RegexFilter, ...] = ()
    limit: int | None = None

    form = "select"


@dataclass(frozen=True)
class InsertData:
    triples: tuple[Triple, ...]

    form = "insert-data"


@dataclass
class ResultTable:
    """SPARQL SELECT result: ordered columns, rows mapping var name -> term or None."""

    columns: list[str]
    rows: list[dict]

    def __len__(self):
        return len(self.rows)

    def to_json(self):
        """Standard SPARQL JSON results format."""
        bindings = []
        for row in self.rows:
            entry = {}
            for name, term in row.items():
                if term is None:
                    continue
                if isinstance(term, Uri):
                    entry[name] = {"type": "uri", "value": term.value}
                else:
                    cell = {"type": "literal", "value": term.text}
                    if term.lang:
                        cell["xml:lang"] = term.lang
                    if term.datatype:
                        cell["datatype"] = term.datatype
                    entry[name] = cell
            bindings.append(entry)
        return {"head": {"vars": list(self.columns)}, "results": {"bindings": bindings}}


def table_from_sparql_json(doc) -> ResultTable:
    columns = list(doc.get("head", {}).get("vars", []))
    rows = []
    for binding in doc.get("results", {}).get("bindings", []):
        row = {}
        for name in columns:
            cell = binding.get(name)
            if cell is None:
                row[name] = None
            elif cell.get("type") == "uri":
                row[name] = Uri(cell["value"])
            else:
                row[name] = Literal(cell.get("value", ""), lang=cell.get("xml:lang"), datatype=cell.get("datatype"))
        rows.append(row)
    return ResultTable(columns=columns, rows=rows)


def term_sort_key(term):
    if term is None:
        return (2, "", "", "")
    if isinstance(term, Uri):
        return (0, term.value, "", "")
    return (1, term.text, term.lang or "", term.datatype or "")


# ---------------------------------------------------------------------------
# Store


class TripleStore:
    """Set-semantics triple store. Concurrent reads are safe; writes are
    serialized by an internal lock and evaluation runs over snapshots."""

    def __init__(self, triples=()):
        self._triples: set[Triple] = set()
        self._lock = threading.Lock()
        for t in triples:
            self.add(t)

    def add(self, triple: Triple) -> bool:
        with self._lock:
            if triple in self._triples:
                return False
            self._triples.add(triple)
            return True

    def __len__(self):
        return len(self._triples)

    def __contains__(self, triple):
        return triple in self._triples

    def snapshot(self) -> frozenset:
        with self._lock:
            return frozenset(self._triples)

    def triples(self):
        return sorted(
            self.snapshot(),
            key=lambda t: (term_sort_key(t.subject), term_sort_key(t.predicate), term_sort_key(t.object)),
        )

    def matching(self, subject=None, predicate=None, obj=None):
        """All triples matching the given constant terms (None = wildcard)."""
        out = []
        for t in self.snapshot():
            if subject is not None and t.subject != subject:
                continue
            if predicate is not None and t.predicate != predicate:
                continue
            if obj is not None and t.object != obj:
                continue
            out.append(t)
        out.sort(key=lambda t: (term_sort_key(t.subject), term_sort_key(t.predicate), term_sort_key(t.object)))
        return out

    def dump(self) -> str:
        """Line-based dump, N-Triples compatible."""
        return "".join(f"{_serialize_term(t.subject)} {_serialize_term(t.predicate)} {_serialize_term(t.object)} .\n" for t in self.triples())

    @classmethod
    def load(cls, text: str) -> "TripleStore":
        store = cls()
        for triple in _parse_ntriples(text):
            store.add(triple)
        return store


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>\#[^\n]*)
    | (?P<iri><[^<>\s]*>)
    | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
    | (?P<string>"(?:[^"\\\n]|\\.)*")
    | (?P<langtag>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
    | (?P<dtsep>\^\^)
    | (?P<pname>[A-Za-z_][A-Za-z0-9_\-]*:[A-Za-z0-9_\-.]*)
    | (?P<keyword>[A-Za-z_][A-Za-z0-9_\-]*)
    | (?P<int>[0-9]+)
    | (?P<punct>[{}().,*;])
    """,
    re.VERBOSE,
)

_STRING_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", "b": "\b", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(
                f"unexpected character {text[pos]!r}",
                line=line,
                column=pos - line_start + 1,
                expected=["token"],
            )
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, value, line, m.start() - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unescape_string(raw: str, line: int, column: int) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(body):
            raise ParseError("dangling escape in string", line=line, column=column)
        esc = body[i + 1]
        if esc in _STRING_ESCAPES:
            out.append(_STRING_ESCAPES[esc])
            i += 2
        elif esc == "u":
            out.append(chr(int(body[i + 2 : i + 6], 16)))
            i += 6
        elif esc == "U":
            out.append(chr(int(body[i + 2 : i + 10], 16)))
            i += 10
        else:
            raise ParseError(f"unknown escape \\{esc}", line=line, column=column)
    return "".join(out)


def _escape_string(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append("\\u%04X" % ord(ch))
        else:
            out.append(ch)
    return "".join(out)


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected):
        tok = self.peek()
        raise ParseError(
            f"expected {' or '.join(expected)}, found {tok.text or 'end of input'!r}",
            line=tok.line,
            column=tok.column,
            expected=list(expected),
        )

    def expect_keyword(self, *words) -> _Token:
        tok = self.peek()
        if tok.kind == "keyword" and tok.text.upper() in words:
            return self.next()
        self.fail(words)

    def at_keyword(self, *words) -> bool:
        tok = self.peek()
        return tok.kind == "keyword" and tok.text.upper() in words

    def expect_punct(self, ch) -> _Token:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == ch:
            return self.next()
        self.fail([repr(ch)])

    def at_punct(self, ch) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == ch

    def parse_query(self):
        while self.at_keyword("PREFIX"):
            self.next()
            tok = self.peek()
            if tok.kind != "pname" or not tok.text.endswith(":"):
                # pname token includes the colon; a bare "name:" is what we want
                if tok.kind == "pname":
                    name, _, rest = tok.text.partition(":")
                    if rest:
                        self.fail(["prefix declaration"])
                    self.next()
                    self.prefixes[name] = self.parse_iri_token()
                    continue
                self.fail(["prefix name"])
            name = tok.text[:-1]
            self.next()
            self.prefixes[name] = self.parse_iri_token()
        if self.at_keyword("SELECT"):
            ast = self.parse_select()
        elif self.at_keyword("INSERT"):
            ast = self.parse_insert()
        else:
            self.fail(["SELECT", "INSERT DATA"])
        tok = self.peek()
        if tok.kind != "eof":
            self.fail(["end of input"])
        return ast

    def parse_iri_token(self) -> str:
        tok = self.peek()
        if tok.kind == "iri":
            self.next()
            return tok.text[1:-1]
        self.fail(["<iri>"])

    def parse_select(self) -> SelectQuery:
        self.expect_keyword("SELECT")
        variables = None
        if self.at_punct("*"):
            self.next()
        else:
            names = []
            while self.peek().kind == "var":
                names.append(Var(self.next().text[1:]))
            if not names:
                self.fail(["?variable", "'*'"])
            variables = tuple(names)
        self.expect_keyword("WHERE")
        self.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list[RegexFilter] = []
        while not self.at_punct("}"):
            if self.at_keyword("FILTER"):
                filters.append(self.parse_filter(patterns))
            else:
                patterns.append(self.parse_pattern())
                if self.at_punct("."):
                    self.next()
        self.expect_punct("}")
        limit = None
        if self.at_keyword("LIMIT"):
            self.next()
            tok = self.peek()
            if tok.kind != "int":
                self.fail(["integer"])
            self.next()
            limit = int(tok.text)
        return SelectQuery(variables=variables, patterns=tuple(patterns), filters=tuple(filters), limit=limit)

    def parse_filter(self, patterns) -> RegexFilter:
        kw = self.expect_keyword("FILTER")
        fn = self.peek()
        if not (fn.kind == "keyword" and fn.text.lower() == "regex"):
            self.fail(["regex"])
        self.next()
        self.expect_punct("(")
        tok = self.peek()
        if tok.kind != "var":
            self.fail(["?variable"])
        var = Var(self.next().text[1:])
        self.expect_punct(",")
        pat_tok = self.peek()
        if pat_tok.kind != "string":
            self.fail(["string"])
        self.next()
        pattern = _unescape_string(pat_tok.text, pat_tok.line, pat_tok.column)
        ignore_case = False
        if self.at_punct(","):
            self.next()
            flags_tok = self.peek()
            if flags_tok.kind != "string":
                self.fail(["string"])
            self.next()
            flags = _unescape_string(flags_tok.text, flags_tok.line, flags_tok.column)
            ignore_case = "i" in flags
        self.expect_punct(")")
        bound = {t.name for p in patterns for t in p.terms() if isinstance(t, Var)}
        if var.name not in bound:
            raise ParseError(
                f"filter variable ?{var.name} does not appear in any preceding pattern",
                line=kw.line,
                column=kw.column,
            )
        return RegexFilter(var=var, pattern=pattern, ignore_case=ignore_case)

    def parse_pattern(self) -> TriplePattern:
        s = self.parse_term()
        p = self.parse_term()
        o = self.parse_term()
        return TriplePattern(s, p, o)

    def parse_term(self):
        tok = self.peek()
        if tok.kind == "iri":
            self.next()
            return Uri(tok.text[1:-1])
        if tok.kind == "var":
            self.next()
            return Var(tok.text[1:])
        if tok.kind == "pname":
            self.next()
            prefix, _, local = tok.text.partition(":")
            if prefix not in self.prefixes:
                raise ParseError(f"undeclared prefix {prefix!r}", line=tok.line, column=tok.column)
            return Uri(self.prefixes[prefix] + local)
        if tok.kind == "string":
            self.next()
            text = _unescape_string(tok.text, tok.line, tok.column)
            nxt = self.peek()
            if nxt.kind == "langtag":
                self.next()
                return Literal(text, lang=nxt.text[1:])
            if nxt.kind == "dtsep":
                self.next()
                return Literal(text, datatype=self.parse_iri_token())
            return Literal(text)
        self.fail(["<iri>", "?variable", "string", "prefixed name"])

    def parse_insert(self) -> InsertData:
        self.expect_keyword("INSERT")
        self.expect_keyword("DATA")
        self.expect_punct("{")
        triples = []
        while not self.at_punct("}"):
            tok = self.peek()
            s = self.parse_term()
            p = self.parse_term()
            o = self.parse_term()
            if isinstance(s, Var) or isinstance(p, Var) or isinstance(o, Var):
                raise ParseError("variables are not allowed in INSERT DATA", line=tok.line, column=tok.column)
            if not isinstance(s, Uri) or not isinstance(p, Uri):
                raise ParseError("triple subject and predicate must be uris", line=tok.line, column=tok.column)
            triples.append(Triple(s, p, o))
            if self.at_punct("."):
                self.next()
        self.expect_punct("}")
        return InsertData(triples=tuple(triples))


def parse_query(text: str):
    """Parse the documented subset; raises ParseError with line/column otherwise."""
    return _Parser(text).parse_query()


def _serialize_term(term) -> str:
    if isinstance(term, Uri):
        return f"<{term.value}>"
    if isinstance(term, Var):
        return f"?{term.name}"
    if isinstance(term, Literal):
        base = f'"{_escape_string(term.text)}"'
        if term.lang:
            return f"{base}@{term.lang}"
        if term.datatype:
            return f"{base}^^<{term.datatype}>"
        return base
    raise TypeError(f"not a term: {term!r}")


def serialize_query(ast) -> str:
    """Canonical text for an AST; parse(serialize(ast)) == ast."""
    if ast.form == "select":
        head = "SELECT *" if ast.variables is None else "SELECT " + " ".join(f"?{v.name}" for v in ast.variables)
        lines = [head, "WHERE {"]
        for pat in ast.patterns:
            lines.append(f"  {_serialize_term(pat.subject)} {_serialize_term(pat.predicate)} {_serialize_term(pat.object)} .")
        for f in ast.filters:
            flags = ', "i"' if f.ignore_case else ""
            lines.append(f'  FILTER regex(?{f.var.name}, "{_escape_string(f.pattern)}"{flags})')
        lines.append("}")
        if ast.limit is not None:
            lines.append(f"LIMIT {ast.limit}")
        return "\n".join(lines) + "\n"
    if ast.form == "insert-data":
        lines = ["INSERT DATA {"]
        for t in ast.triples:
            lines.append(f"  {_serialize_term(t.subject)} {_serialize_term(t.predicate)} {_serialize_term(t.object)} .")
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise TypeError(f"unknown query form {ast.form!r}")


# ---------------------------------------------------------------------------
# Evaluation


def apply_insert(store: TripleStore, ast) -> int:
    """Insert all triples (set semantics); returns the number of novel triples."""
    if ast.form != "insert-data":
        raise FormMismatch(f"expected insert-data, got {ast.form}")
    added = 0
    for t in ast.triples:
        if store.add(t):
            added += 1
    return added


def _match_pattern(pattern: TriplePattern, triple: Triple, binding: dict):
    extended = dict(binding)
    for pat_term, value in zip(pattern.terms(), (triple.subject, triple.predicate, triple.object)):
        if isinstance(pat_term, Var):
            bound = extended.get(pat_term.name)
            if bound is None:
                extended[pat_term.name] = value
            elif bound != value:
                return None
        elif pat_term != value:
            return None
    return extended


def _lexical(term) -> str:
    return term.value if isinstance(term, Uri) else term.text


def evaluate_select(store: TripleStore, ast) -> ResultTable:
    if ast.form != "select":
        raise FormMismatch(f"expected select, got {ast.form}")
    snapshot = sorted(
        store.snapshot(),
        key=lambda t: (term_sort_key(t.subject), term_sort_key(t.predicate), term_sort_key(t.object)),
    )
    bindings = [dict()]
    for pattern in ast.patterns:
        next_bindings = []
        for binding in bindings:
            for triple in snapshot:
                extended = _match_pattern(pattern, triple, binding)
                if extended is not None:
                    next_bindings.append(extended)
        bindings = next_bindings
        if not bindings:
            break
    for f in ast.filters:
        flags = re.IGNORECASE if f.ignore_case else 0
        rx = re.compile(f.pattern, flags)
        bindings = [b for b in bindings if f.var.name in b and rx.search(_lexical(b[f.var.name]))]
    if ast.variables is None:
        seen = []
        for pattern in ast.patterns:
            for term in pattern.terms():
                if isinstance(term, Var) and term.name not in seen:
                    seen.append(term.name)
        columns = seen
    else:
        columns = [v.name for v in ast.variables]
    rows = [{c: b.get(c) for c in columns} for b in bindings]
    rows.sort(key=lambda r: tuple(term_sort_key(r[c]) for c in columns))
    if ast.limit is not None:
        rows = rows[: ast.limit]
    return ResultTable(columns=columns, rows=rows)


def run_query(store: TripleStore, text: str):
    """Parse and run; returns a ResultTable for SELECT, novel-triple count for INSERT DATA."""
    ast = parse_query(text)
    if ast.form == "select":
        return evaluate_select(store, ast)
    return apply_insert(store, ast)


# ---------------------------------------------------------------------------
# N-Triples style load


def _parse_ntriples(text: str):
    parser = _Parser("")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _tokenize(line)
        parser.tokens = tokens
        parser.pos = 0
        s = parser.parse_term()
        p = parser.parse_term()
        o = parser.parse_term()
        if parser.at_punct("."):
            parser.next()
        if parser.peek().kind != "eof":
            raise ParseError(f"trailing content on triple line {lineno}", line=lineno, column=parser.peek().column)
        if not isinstance(s, Uri) or not isinstance(p, Uri) or isinstance(o, Var):
            raise ParseError(f"invalid triple on line {lineno}", line=lineno, column=1)
        yield Triple(s, p, o)

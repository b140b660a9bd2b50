"""Text format for test measures.

A description names a measure kind, a dimension and a list of assignments::

    # Born measure of a diagonal state
    measure born dim 3
    rho = diag(0.5, 0.3, 0.2)

Newlines are ordinary whitespace, so the same text fits on one line;
``#`` starts a comment.  The grammar (EBNF) is in ``docs/measure_dsl.md``.

    spec       = "measure" kind "dim" INT { assignment } ;
    kind       = "born" | "affine" | "quadratic" | "poly" ;
    assignment = NAME [ "(" INT ")" ] "=" expr ;
    expr       = term { ( "+" | "-" ) term } ;
    term       = unary { ( "*" | "/" ) unary } ;
    unary      = "-" unary | primary ;
    primary    = NUMBER | IMAG | NAME | call | list | "(" expr ")" ;
    call       = NAME "(" [ expr { "," expr } ] ")" ;
    list       = "[" expr { "," expr } "]" ;

``IMAG`` is a number immediately followed by ``i`` (``0.5i``), so a complex
literal is written ``a+bi``.  Nested lists are row-major matrices.
"""
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import SpecDimensionError, SpecSyntaxError, UnknownIdentifierError
from .measures import AffineMeasure, Measure, born, polynomial, quadratic

KINDS = ("born", "affine", "quadratic", "poly")
FIELDS = {
    "born": {"rho": False},
    "quadratic": {"rho": False},
    "poly": {"rho": False, "coeffs": False},
    "affine": {"eta": False, "K": True},
}


# -- AST ------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    imag: bool = False
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Name:
    id: str
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ListLit:
    items: tuple
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Assign:
    name: str
    index: Optional[int]
    value: object
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Spec:
    kind: str
    dim: int
    assignments: tuple


# -- lexer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z0-9_]))?
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/=(),\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        col = i - line_start + 1
        kind = m.lastgroup
        if m.group("number") is not None:
            kind = "imag" if m.group("imag") else "number"
            tokens.append(Token(kind, m.group("number"), line, col))
        elif kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("name", "op"):
            tokens.append(Token(kind, m.group(kind), line, col))
        i = m.end()
    tokens.append(Token("eof", "", line, len(text) - line_start + 1))
    return tokens


# -- parser ---------------------------------------------------------------

class _Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return SpecSyntaxError(f"{msg}, found {found}", tok.line, tok.col)

    def advance(self):
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text):
        if self.tok.text != text or self.tok.kind not in ("name", "op"):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_int(self):
        tok = self.tok
        if tok.kind != "number" or not tok.text.isdigit():
            raise self.error("expected an integer")
        self.advance()
        return int(tok.text)

    def spec(self):
        self.expect("measure")
        tok = self.tok
        if tok.kind != "name" or tok.text not in KINDS:
            raise self.error(f"expected a measure kind {KINDS}")
        self.advance()
        self.expect("dim")
        dim = self.expect_int()
        assignments = []
        while self.tok.kind != "eof":
            assignments.append(self.assignment())
        return Spec(tok.text, dim, tuple(assignments))

    def assignment(self):
        tok = self.tok
        if tok.kind != "name":
            raise self.error("expected an assignment")
        self.advance()
        index = None
        if self.tok.text == "(":
            self.advance()
            index = self.expect_int()
            self.expect(")")
        self.expect("=")
        return Assign(tok.text, index, self.expr(), pos=(tok.line, tok.col))

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            left = BinOp(op.text, left, self.term(), pos=(op.line, op.col))
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance()
            left = BinOp(op.text, left, self.unary(), pos=(op.line, op.col))
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self.advance()
            return Neg(self.unary(), pos=(op.line, op.col))
        return self.primary()

    def _items(self, close):
        items = [self.expr()]
        while self.tok.text == ",":
            self.advance()
            items.append(self.expr())
        self.expect(close)
        return tuple(items)

    def primary(self):
        tok = self.tok
        pos = (tok.line, tok.col)
        if tok.kind in ("number", "imag"):
            self.advance()
            return Num(float(tok.text), tok.kind == "imag", pos=pos)
        if tok.kind == "name":
            self.advance()
            if self.tok.text == "(" and self.tok.kind == "op":
                self.advance()
                if self.tok.text == ")":
                    self.advance()
                    return Call(tok.text, (), pos=pos)
                return Call(tok.text, self._items(")"), pos=pos)
            return Name(tok.text, pos=pos)
        if tok.text == "[" and tok.kind == "op":
            self.advance()
            return ListLit(self._items("]"), pos=pos)
        if tok.text == "(" and tok.kind == "op":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error("expected an expression")


def parse(text):
    """Parse measure text into a :class:`Spec` AST (no semantic checks)."""
    return _Parser(text).spec()


# -- printer --------------------------------------------------------------

def _fmt(node):
    if isinstance(node, Num):
        return repr(float(node.value)) + ("i" if node.imag else "")
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Neg):
        inner = _fmt(node.operand)
        return "-" + (f"({inner})" if isinstance(node.operand, BinOp) else inner)
    if isinstance(node, BinOp):
        return f"({_fmt(node.left)} {node.op} {_fmt(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(_fmt(a) for a in node.args)})"
    if isinstance(node, ListLit):
        return "[" + ", ".join(_fmt(a) for a in node.items) + "]"
    raise TypeError(f"not an expression node: {node!r}")


def to_text(spec):
    """Render a :class:`Spec`; ``parse(to_text(s)) == s``."""
    lines = [f"measure {spec.kind} dim {spec.dim}"]
    for a in spec.assignments:
        target = a.name if a.index is None else f"{a.name}({a.index})"
        lines.append(f"{target} = {_fmt(a.value)}")
    return "\n".join(lines) + "\n"


# -- evaluation -----------------------------------------------------------

def _where(node):
    return node.pos or (0, 0)


def evaluate(node, dim):
    """Evaluate an expression to a complex scalar or numpy array."""
    if isinstance(node, Num):
        return 1j * node.value if node.imag else complex(node.value)
    if isinstance(node, Name):
        if node.id == "zero":
            return np.zeros((dim, dim), dtype=complex)
        if node.id == "identity":
            return np.eye(dim, dtype=complex)
        raise UnknownIdentifierError(f"unknown identifier {node.id!r}", *_where(node))
    if isinstance(node, Neg):
        return -evaluate(node.operand, dim)
    if isinstance(node, BinOp):
        a, b = evaluate(node.left, dim), evaluate(node.right, dim)
        sa, sb = np.shape(a), np.shape(b)
        if node.op == "/":
            if sb != ():
                raise SpecDimensionError("division by a non-scalar", *_where(node))
            return a / b
        if node.op == "*":
            if len(sa) == 2 and len(sb) == 2:
                if sa[1] != sb[0]:
                    raise SpecDimensionError(f"cannot multiply {sa} by {sb}", *_where(node))
                return a @ b
            if sa and sb and sa != sb:
                raise SpecDimensionError(f"shape mismatch {sa} * {sb}", *_where(node))
            return a * b
        if sa != sb and sa and sb:
            raise SpecDimensionError(f"shape mismatch {sa} {node.op} {sb}", *_where(node))
        return a + b if node.op == "+" else a - b
    if isinstance(node, Call):
        args = [evaluate(a, dim) for a in node.args]
        if node.func == "diag":
            flat = args[0] if len(args) == 1 and np.ndim(args[0]) == 1 else args
            if any(np.ndim(x) for x in flat):
                raise SpecDimensionError("diag takes scalars", *_where(node))
            return np.diag(np.array(flat, dtype=complex))
        if node.func == "proj":
            v = np.array(args[0] if len(args) == 1 else args, dtype=complex)
            if v.ndim != 1:
                raise SpecDimensionError("proj takes a vector", *_where(node))
            n = np.linalg.norm(v)
            if n == 0:
                raise SpecDimensionError("proj of the zero vector", *_where(node))
            v = v / n
            return np.outer(v, v.conj())
        raise UnknownIdentifierError(f"unknown function {node.func!r}", *_where(node))
    if isinstance(node, ListLit):
        items = [evaluate(a, dim) for a in node.items]
        shapes = {np.shape(x) for x in items}
        if len(shapes) != 1:
            raise SpecDimensionError("ragged list literal", *_where(node))
        return np.array(items, dtype=complex)
    raise TypeError(f"not an expression node: {node!r}")


def _square(value, node, dim, what):
    if np.shape(value) != (dim, dim):
        raise SpecDimensionError(
            f"{what} has shape {np.shape(value)}, declared dim is {dim}", *_where(node)
        )
    if np.linalg.norm(value - value.conj().T) > 1e-12:
        raise SpecDimensionError(f"{what} is not Hermitian", *_where(node))
    return value


def build(spec):
    """Turn a parsed :class:`Spec` into a :class:`~finitecontext.measures.Measure`."""
    allowed = FIELDS[spec.kind]
    if spec.dim < 1:
        raise SpecDimensionError("dimension must be positive", 1, 1)
    values = {}
    ks = {}
    for a in spec.assignments:
        line, col = _where(a)
        if a.name not in allowed:
            raise UnknownIdentifierError(
                f"{a.name!r} is not a field of a {spec.kind} measure", line, col)
        if allowed[a.name] != (a.index is not None):
            raise SpecSyntaxError(
                f"{a.name!r} {'requires' if allowed[a.name] else 'takes no'} a rank index", line, col)
        v = evaluate(a.value, spec.dim)
        if a.index is not None:
            if np.ndim(v) or abs(np.imag(v)) > 0:
                raise SpecDimensionError(f"{a.name}({a.index}) must be a real scalar", line, col)
            if not 1 <= a.index <= spec.dim:
                raise SpecDimensionError(f"rank class {a.index} outside 1..{spec.dim}", line, col)
            ks[a.index] = float(np.real(v))
        else:
            values[a.name] = (v, a.value)
    required = [n for n, indexed in allowed.items() if not indexed]
    for n in required:
        if n not in values:
            raise SpecSyntaxError(f"missing required field {n!r}", 1, 1)
    if spec.kind == "affine":
        if not ks:
            raise SpecSyntaxError("affine measure needs at least one K(rank)", 1, 1)
        eta = _square(*values["eta"], spec.dim, "eta")
        return AffineMeasure(eta, ks).as_measure()
    rho = _square(*values["rho"], spec.dim, "rho")
    if spec.kind == "born":
        return born(rho)
    if spec.kind == "quadratic":
        return quadratic(rho)
    coeffs, node = values["coeffs"]
    if np.ndim(coeffs) != 1 or np.any(np.abs(np.imag(coeffs)) > 0):
        raise SpecDimensionError("coeffs must be a list of real numbers", *_where(node))
    return polynomial(rho, np.real(coeffs))


def parse_measure_spec(text) -> Measure:
    """Parse and build a measure from its text description."""
    return build(parse(text))


def load_measure(path):
    with open(path, encoding="utf-8") as fh:
        return parse_measure_spec(fh.read())

"""Minimal expression language for the coefficients ``b`` and ``sigma``.

Grammar::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | "u" | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "sin" | "cos" | "tanh"

There is deliberately no ``exp`` and no power operator, so that the sampled
Lipschitz constants are meaningful.
"""

import re

import numpy as np

from .errors import LipschitzUnbounded, ParseError

LIPSCHITZ_RANGE = 100.0
LIPSCHITZ_BOUND = 100.0
_SAMPLES = 200_001

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")
_FUNCS = {"sin": np.sin, "cos": np.cos, "tanh": np.tanh}


class Node:
    __slots__ = ()


class Num(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def eval(self, u):
        return np.full_like(u, self.value, dtype=float)

    def diff(self):
        return Num(0.0)

    def source(self):
        return repr(self.value)


class Var(Node):
    __slots__ = ()

    def eval(self, u):
        return np.asarray(u, dtype=float)

    def diff(self):
        return Num(1.0)

    def source(self):
        return "u"


class Neg(Node):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def eval(self, u):
        return -self.arg.eval(u)

    def diff(self):
        return _neg(self.arg.diff())

    def source(self):
        return f"(-{self.arg.source()})"


class Bin(Node):
    __slots__ = ("op", "left", "right")

    def __init__(self, op, left, right):
        self.op, self.left, self.right = op, left, right

    def eval(self, u):
        a, b = self.left.eval(u), self.right.eval(u)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b

    def diff(self):
        a, b = self.left, self.right
        da, db = a.diff(), b.diff()
        if self.op in "+-":
            return _bin(self.op, da, db)
        if self.op == "*":
            return _bin("+", _bin("*", da, b), _bin("*", a, db))
        num = _bin("-", _bin("*", da, b), _bin("*", a, db))
        return _bin("/", num, _bin("*", b, b))

    def source(self):
        return f"({self.left.source()} {self.op} {self.right.source()})"


class Call(Node):
    __slots__ = ("fn", "arg")

    def __init__(self, fn, arg):
        self.fn, self.arg = fn, arg

    def eval(self, u):
        return _FUNCS[self.fn](self.arg.eval(u))

    def diff(self):
        da = self.arg.diff()
        if self.fn == "sin":
            outer = Call("cos", self.arg)
        elif self.fn == "cos":
            outer = _neg(Call("sin", self.arg))
        else:
            th = Call("tanh", self.arg)
            outer = _bin("-", Num(1.0), _bin("*", th, th))
        return _bin("*", outer, da)

    def source(self):
        return f"{self.fn}({self.arg.source()})"


def _is_num(node, v=None):
    return isinstance(node, Num) and (v is None or node.value == v)


def _neg(a):
    if _is_num(a):
        return Num(-a.value)
    return Neg(a)


def _bin(op, a, b):
    """Build a binary node with light constant folding."""
    if _is_num(a) and _is_num(b):
        return Num(Bin(op, a, b).eval(np.zeros(1))[0])
    if op == "+":
        if _is_num(a, 0.0):
            return b
        if _is_num(b, 0.0):
            return a
    if op == "-" and _is_num(b, 0.0):
        return a
    if op == "*":
        if _is_num(a, 0.0) or _is_num(b, 0.0):
            return Num(0.0)
        if _is_num(a, 1.0):
            return b
        if _is_num(b, 1.0):
            return a
    if op == "/" and _is_num(b, 1.0):
        return a
    return Bin(op, a, b)


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = []
        pos = 0
        for m in _TOKEN.finditer(text):
            if m.group(0).strip() == "":
                pos = m.end()
                continue
            kind = "num" if m.group(1) else "name" if m.group(2) else "op"
            val = m.group(1) or m.group(2) or m.group(3)
            self.toks.append((kind, val, m.start(m.lastindex)))
            pos = m.end()
        if text[pos:].strip():
            raise ParseError(f"unexpected trailing text {text[pos:]!r}", 1, pos + 1)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, len(self.text))

    def take(self, val=None):
        tok = self.peek()
        if tok[0] is None or (val is not None and tok[1] != val):
            want = repr(val) if val else "a token"
            raise ParseError(f"expected {want}, found {tok[1]!r}", 1, tok[2] + 1)
        self.i += 1
        return tok

    def parse(self):
        if not self.toks:
            raise ParseError("empty expression", 1, 1)
        node = self.expr()
        if self.peek()[0] is not None:
            tok = self.peek()
            raise ParseError(f"unexpected token {tok[1]!r}", 1, tok[2] + 1)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return Num(val)
        if kind == "name":
            self.take()
            if val == "u":
                return Var()
            if val in _FUNCS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(val, arg)
            raise ParseError(f"unknown name {val!r}", 1, pos + 1)
        if kind is None:
            raise ParseError("unexpected end of expression", 1, pos + 1)
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"unexpected token {val!r}", 1, pos + 1)


class CoefficientExpr:
    """Parsed coefficient with its sampled Lipschitz constants.

    Attributes
    ----------
    text : str
        Source text as given.
    lipschitz : float
        Estimate of ``sup |f(u) - f(v)| / |u - v|`` on ``[-R, R]``.
    lipschitz_deriv : float
        Estimate of the Lipschitz constant of ``f'`` on the same range.
    """

    def __init__(self, text, node, R=LIPSCHITZ_RANGE):
        self.text = text
        self.node = node
        self._dnode = node.diff()
        self.lipschitz, self.lipschitz_deriv = estimate_lipschitz(node, R)

    def __call__(self, u):
        return self.node.eval(np.asarray(u, dtype=float))

    def deriv(self, u):
        return self._dnode.eval(np.asarray(u, dtype=float))

    @property
    def is_constant(self):
        return self.lipschitz == 0.0

    @property
    def is_linear(self):
        return self.lipschitz_deriv == 0.0

    def __repr__(self):
        return f"CoefficientExpr({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, CoefficientExpr) and self.text == other.text

    def __hash__(self):
        return hash(self.text)


def estimate_lipschitz(node, R=LIPSCHITZ_RANGE, samples=_SAMPLES):
    u = np.linspace(-R, R, samples)
    h = u[1] - u[0]
    with np.errstate(all="ignore"):
        f = node.eval(u)
        d1 = np.diff(f) / h
        d2 = np.diff(f, 2) / h ** 2
    if not np.all(np.isfinite(f)):
        return np.inf, np.inf
    L = float(np.max(np.abs(d1)))
    L2 = float(np.max(np.abs(d2)))
    # rounding residue of affine maps
    noise = 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(f))))
    if L2 < 4 * noise / h ** 2:
        L2 = 0.0
    if L < 2 * noise / h:
        L = 0.0
    return L, L2


def parse_expr(text, bound=LIPSCHITZ_BOUND, R=LIPSCHITZ_RANGE):
    """Parse ``text`` into a :class:`CoefficientExpr`.

    Raises
    ------
    ParseError
        On a syntax error (with column).
    LipschitzUnbounded
        When the sampled Lipschitz constant of the function or of its
        derivative exceeds ``bound``.
    """
    node = _Parser(str(text)).parse()
    ex = CoefficientExpr(str(text), node, R)
    if not (ex.lipschitz <= bound):
        raise LipschitzUnbounded(f"{text!r}: sampled Lipschitz constant {ex.lipschitz:.4g} "
                                 f"exceeds {bound} on [-{R}, {R}]")
    if not (ex.lipschitz_deriv <= bound):
        raise LipschitzUnbounded(f"{text!r}: derivative has sampled Lipschitz constant "
                                 f"{ex.lipschitz_deriv:.4g} above {bound}")
    return ex


def family(name, value=None):
    """Source text of the named coefficient families ``zero``, ``const``, ``linear``, ``sine``."""
    if name == "zero":
        return "0"
    if name == "const":
        return repr(float(value))
    if name == "linear":
        return f"{float(value)!r}*u"
    if name == "sine":
        return f"{float(value)!r}*sin(u)"
    raise ValueError(f"unknown coefficient family {name!r}")

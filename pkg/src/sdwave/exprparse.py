"""Small arithmetic expression language for initial data, sources, and
nonlinearities given in config files.

Grammar (precedence low to high):

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := "-" factor | power
    power   := atom ("^" factor)?          # right associative
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

Names are either the constant ``pi``, a known function (sin, cos, exp, log,
abs, sqrt), or a variable.  Which variables are legal is decided by the
caller; parsing accepts any of the declared set and records what was used.
Offsets in error messages count characters from the start of the text.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ParseError, SamplingError, UsageError
from .mesh import Field

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
}

DEFAULT_VARIABLES = ("x", "y", "t")


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Name(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | lparen | rparen | end
    text: str
    pos: int


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ParseError(f"bad number literal {lit!r}", i) from None
            tokens.append(_Token("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            tokens.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            tokens.append(_Token("rparen", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0
        self.variables = frozenset(variables)

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_rparen(self, open_pos):
        tok = self.take()
        if tok.kind != "rparen":
            raise ParseError(
                f"missing ')' for '(' at offset {open_pos}", tok.pos
            )

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r} after expression", tok.pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            e = Bin(op, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            e = Bin(op, e, self.factor())
        return e

    def factor(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            return Neg(self.factor())
        if tok.kind == "op" and tok.text == "+":
            self.take()
            return self.factor()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.take()
            # right associative; exponent binds tighter than unary minus there
            return Bin("^", base, self.factor())
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if self.peek().kind == "lparen":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}", tok.pos)
                open_tok = self.take()
                arg = self.expr()
                self.expect_rparen(open_tok.pos)
                return Call(tok.text, arg)
            if tok.text == "pi":
                return Num(math.pi)
            if tok.text in self.variables:
                return Name(tok.text)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.pos)
        if tok.kind == "lparen":
            e = self.expr()
            self.expect_rparen(tok.pos)
            return e
        raise ParseError("expected a number, name, or '('", tok.pos)


def parse(text, variables=DEFAULT_VARIABLES) -> Expr:
    """Parse text into an expression tree.

    ``variables`` lists the names allowed to appear; anything else raises
    ParseError with the character offset of the offending token.
    """
    if not isinstance(text, str) or text.strip() == "":
        raise ParseError("empty expression", 0)
    return _Parser(text, variables).parse()


def free_names(e: Expr):
    out = set()

    def walk(node):
        if isinstance(node, Name):
            out.add(node.name)
        elif isinstance(node, Neg):
            walk(node.operand)
        elif isinstance(node, Bin):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Call):
            walk(node.arg)

    walk(e)
    return out


def evaluate(e: Expr, **bindings):
    """Evaluate over scalars or NumPy arrays; faults are left as non-finite
    values for the caller to diagnose (see ``sample``)."""
    with np.errstate(all="ignore"):
        return _eval(e, bindings)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        try:
            return env[node.name]
        except KeyError:
            raise UsageError(f"no value bound for variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.fn](_eval(node.arg, env))
    a = _eval(node.left, env)
    b = _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        with np.errstate(all="ignore"):
            return np.true_divide(a, b)
    if node.op == "^":
        with np.errstate(all="ignore"):
            return np.float_power(a, b)
    raise UsageError(f"unknown operator {node.op!r}")


class _Fault(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


def _eval_diagnose(node, env):
    """Scalar evaluation that names the first faulting operation."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        return float(env[node.name])
    if isinstance(node, Neg):
        return -_eval_diagnose(node.operand, env)
    if isinstance(node, Call):
        a = _eval_diagnose(node.arg, env)
        if node.fn == "log" and a <= 0.0:
            raise _Fault(f"log of non-positive value {a!r}")
        if node.fn == "sqrt" and a < 0.0:
            raise _Fault(f"sqrt of negative value {a!r}")
        with np.errstate(all="ignore"):
            v = float(FUNCTIONS[node.fn](a))
        if not math.isfinite(v):
            raise _Fault(f"overflow in {node.fn}({a!r})")
        return v
    a = _eval_diagnose(node.left, env)
    b = _eval_diagnose(node.right, env)
    if node.op == "/" and b == 0.0:
        raise _Fault(f"division by zero ({a!r} / 0)")
    if node.op == "^":
        if a == 0.0 and b < 0.0:
            raise _Fault(f"zero raised to negative power {b!r}")
        if a < 0.0 and b != round(b):
            raise _Fault(f"negative base {a!r} raised to non-integer power {b!r}")
    v = float(_eval(node, env))
    if not math.isfinite(v):
        raise _Fault(f"overflow in {node.op!r} operation")
    return v


def _domain_variables(domain):
    return ("x",) if domain.dimension == 1 else ("x", "y")


def sample(e: Expr, domain, bindings=None) -> Field:
    """Evaluate a time-independent expression at the interior nodes.

    ``bindings`` may supply values for extra non-coordinate names (sweep
    parameters).  A domain fault at any node raises SamplingError naming the
    operation and the node location.
    """
    env = dict(bindings or {})
    allowed = set(_domain_variables(domain)) | set(env)
    used = free_names(e)
    bad = used - allowed
    if bad:
        raise UsageError(
            f"expression uses {sorted(bad)} but the domain provides "
            f"{sorted(allowed)}"
        )
    for name in _domain_variables(domain):
        env[name] = domain.coords[name]
    values = np.asarray(evaluate(e, **env), dtype=np.float64)
    values = np.broadcast_to(values, (domain.n_interior,)).copy()
    if not np.all(np.isfinite(values)):
        i = int(np.argmin(np.isfinite(values)))
        point = {k: float(domain.coords[k][i]) for k in _domain_variables(domain)}
        scalar_env = dict(bindings or {})
        scalar_env.update(point)
        try:
            _eval_diagnose(e, scalar_env)
            msg = "non-finite value"
        except _Fault as fault:
            msg = fault.message
        where = ", ".join(f"{k}={v:.6g}" for k, v in point.items())
        raise SamplingError(f"{msg} at node {i} ({where})")
    return Field(domain, values)


def sample_at_time(e: Expr, domain, t, bindings=None):
    """Node values of a time-dependent expression at time t, as an array."""
    env = dict(bindings or {})
    env["t"] = float(t)
    for name in _domain_variables(domain):
        env[name] = domain.coords[name]
    values = np.asarray(evaluate(e, **env), dtype=np.float64)
    return np.broadcast_to(values, (domain.n_interior,))


def boundary_compatibility(e: Expr, domain, bindings=None) -> float:
    """Largest magnitude of the expression on the boundary nodes.

    Initial data is imposed on interior nodes only; a large value here means
    the expression disagrees with the homogeneous boundary condition.  A
    non-finite boundary value reports as inf.
    """
    env = dict(bindings or {})
    if domain.dimension == 1:
        xs = np.array([0.0, domain.lengths[0]])
        env["x"] = xs
    else:
        Lx, Ly = domain.lengths
        nx, ny = domain.cells
        gx = np.linspace(0.0, Lx, nx + 1)
        gy = np.linspace(0.0, Ly, ny + 1)
        parts_x = [gx, gx, np.array([0.0, Lx]).repeat(ny - 1)]
        parts_y = [np.zeros(nx + 1), np.full(nx + 1, Ly),
                   np.tile(gy[1:-1], 2)]
        env["x"] = np.concatenate(parts_x)
        env["y"] = np.concatenate(parts_y)
    with np.errstate(all="ignore"):
        vals = np.asarray(evaluate(e, **env), dtype=np.float64)
    vals = np.atleast_1d(vals)
    if not np.all(np.isfinite(vals)):
        return math.inf
    return float(np.max(np.abs(vals))) if vals.size else 0.0


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def pretty(e: Expr) -> str:
    """Render with minimal parentheses; parses back to the same tree shape."""
    return _pretty(e, 0)


def _pretty(node, parent_prec):
    if isinstance(node, Num):
        if node.value == math.pi:
            return "pi"
        return repr(node.value)
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({_pretty(node.arg, 0)})"
    if isinstance(node, Neg):
        s = "-" + _pretty(node.operand, _PREC["neg"])
        return f"({s})" if parent_prec > _PREC["neg"] else s
    prec = _PREC[node.op]
    if node.op == "^":
        # right associative: left operand needs strictly higher precedence
        left = _pretty(node.left, prec + 1)
        right = _pretty(node.right, prec)
    else:
        left = _pretty(node.left, prec)
        right = _pretty(node.right, prec + 1)
    s = f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
    return f"({s})" if parent_prec > prec else s

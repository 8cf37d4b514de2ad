"""Observable-function dictionaries for lifting states.

Observables are stored as small expression trees over the state components
(operators: +, *, integer powers, sin, cos, sgn, abs) rather than compiled
code, so a dictionary can be rendered to plain strings inside a model file
and parsed back without the program that created it. Evaluation is pure and
deterministic: the same observable applied to the same state gives
bit-identical results.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .exceptions import InputError

__all__ = [
    "Observable",
    "Dictionary",
    "DictionarySpec",
    "build_dictionary",
    "parse_expression",
    "projection_matrix",
    "project",
]


# ---------------------------------------------------------------------------
# Expression trees

_PREC_ADD, _PREC_MUL, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "sgn": np.sign, "abs": np.abs}


class Expr:
    """Base node. Subclasses evaluate vectorized over sample columns."""

    def evaluate(self, cols: Sequence[np.ndarray]):
        raise NotImplementedError

    def render(self) -> str:
        return self._render(_PREC_ADD)

    def _render(self, prec: int) -> str:
        raise NotImplementedError

    def _wrap(self, text: str, own: int, prec: int) -> str:
        return f"({text})" if own < prec else text

    def __repr__(self):
        return f"{type(self).__name__}({self.render()!r})"


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def evaluate(self, cols):
        return self.value

    def _render(self, prec):
        text = repr(float(self.value))
        own = _PREC_ATOM if self.value >= 0 else _PREC_MUL
        return self._wrap(text, own, prec)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    index: int  # 0-based; rendered 1-based as x1, x2, ...

    def evaluate(self, cols):
        return cols[self.index]

    def _render(self, prec):
        return f"x{self.index + 1}"


@dataclass(frozen=True, repr=False)
class Add(Expr):
    terms: tuple

    def evaluate(self, cols):
        total = self.terms[0].evaluate(cols)
        for term in self.terms[1:]:
            total = total + term.evaluate(cols)
        return total

    def _render(self, prec):
        text = " + ".join(t._render(_PREC_ADD) for t in self.terms)
        return self._wrap(text, _PREC_ADD, prec)


@dataclass(frozen=True, repr=False)
class Mul(Expr):
    factors: tuple

    def evaluate(self, cols):
        product = self.factors[0].evaluate(cols)
        for factor in self.factors[1:]:
            product = product * factor.evaluate(cols)
        return product

    def _render(self, prec):
        text = "*".join(f._render(_PREC_MUL) for f in self.factors)
        return self._wrap(text, _PREC_MUL, prec)


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int  # positive integer

    def evaluate(self, cols):
        return self.base.evaluate(cols) ** self.exponent

    def _render(self, prec):
        text = f"{self.base._render(_PREC_ATOM)}^{self.exponent}"
        return self._wrap(text, _PREC_POW, prec)


@dataclass(frozen=True, repr=False)
class Func(Expr):
    name: str
    arg: Expr

    def evaluate(self, cols):
        return _FUNCTIONS[self.name](self.arg.evaluate(cols))

    def _render(self, prec):
        return f"{self.name}({self.arg.render()})"


def _negate(node: Expr) -> Expr:
    if isinstance(node, Const):
        return Const(-node.value)
    return Mul((Const(-1.0), node))


# ---------------------------------------------------------------------------
# Expression parser (inverse of render)

_TOKEN_CHARS = set("+-*^()")


def _tokenize(text: str) -> list:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in _TOKEN_CHARS:
            tokens.append(ch)
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] in ".eE" or
                             (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            try:
                tokens.append(float(text[i:j]))
            except ValueError:
                raise InputError(f"bad number {text[i:j]!r} in expression {text!r}")
            i = j
        elif ch.isalpha():
            j = i
            while j < n and text[j].isalpha():
                j += 1
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(text[i:j])
            i = j
        else:
            raise InputError(f"unexpected character {ch!r} in expression {text!r}")
    return tokens


class _Parser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        token = self.peek()
        self.pos += 1
        return token

    def expect(self, token):
        got = self.next()
        if got != token:
            raise InputError(f"expected {token!r}, got {got!r} in {self.text!r}")

    def expression(self) -> Expr:
        terms = [self.term()]
        while self.peek() in ("+", "-"):
            op = self.next()
            term = self.term()
            terms.append(term if op == "+" else _negate(term))
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def term(self) -> Expr:
        factors = [self.unary()]
        while self.peek() == "*":
            self.next()
            factors.append(self.unary())
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))

    def unary(self) -> Expr:
        if self.peek() == "-":
            self.next()
            return _negate(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == "^":
            self.next()
            exponent = self.next()
            if not (isinstance(exponent, float) and exponent == int(exponent) and exponent >= 1):
                raise InputError(f"exponent must be a positive integer in {self.text!r}")
            return Pow(base, int(exponent))
        return base

    def atom(self) -> Expr:
        token = self.next()
        if isinstance(token, float):
            return Const(token)
        if token == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        if isinstance(token, str):
            if token in _FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Func(token, arg)
            if token.startswith("x") and token[1:].isdigit() and int(token[1:]) >= 1:
                return Var(int(token[1:]) - 1)
        raise InputError(f"unexpected token {token!r} in {self.text!r}")


def parse_expression(text: str) -> Expr:
    """Parse an observable expression string back into a tree."""
    parser = _Parser(_tokenize(text), text)
    node = parser.expression()
    if parser.peek() is not None:
        raise InputError(f"trailing tokens after expression in {text!r}")
    return node


def _max_var_index(node: Expr) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Add):
        return max(_max_var_index(t) for t in node.terms)
    if isinstance(node, Mul):
        return max(_max_var_index(f) for f in node.factors)
    if isinstance(node, Pow):
        return _max_var_index(node.base)
    if isinstance(node, Func):
        return _max_var_index(node.arg)
    return -1


# ---------------------------------------------------------------------------
# Observables and dictionaries


@dataclass(frozen=True)
class Observable:
    """One scalar observable: an expression tree plus a display label."""

    expr: Expr
    label: str
    kind: str = "custom"

    @classmethod
    def from_expression(cls, text: str, kind: str = "custom") -> "Observable":
        expr = parse_expression(text)
        return cls(expr=expr, label=expr.render(), kind=kind)


def _coordinate(i: int) -> Observable:
    return Observable(Var(i), f"x{i + 1}", kind="coordinate")


def _power_factor(base: Expr, exponent: int) -> Expr:
    return base if exponent == 1 else Pow(base, exponent)


def _monomial(exponents: Sequence[int]) -> Observable:
    factors = [
        _power_factor(Var(i), e) for i, e in enumerate(exponents) if e > 0
    ]
    expr = factors[0] if len(factors) == 1 else Mul(tuple(factors))
    return Observable(expr, expr.render(), kind="monomial")


def _trig_monomial(a: int, b: int, c: int) -> Observable:
    # sin(x1)^a * cos(x1)^b * x2^c
    factors = []
    if a:
        factors.append(_power_factor(Func("sin", Var(0)), a))
    if b:
        factors.append(_power_factor(Func("cos", Var(0)), b))
    if c:
        factors.append(_power_factor(Var(1), c))
    expr = factors[0] if len(factors) == 1 else Mul(tuple(factors))
    return Observable(expr, expr.render(), kind="trig_monomial")


def _friction_term(mass: float, gravity: float, com_length: float) -> Observable:
    # sgn(x2)*|m*a*x2^2 + m*g*cos(x1)|
    inner = Add((
        Mul((Const(mass * com_length), Pow(Var(1), 2))),
        Mul((Const(mass * gravity), Func("cos", Var(0)))),
    ))
    expr = Mul((Func("sgn", Var(1)), Func("abs", inner)))
    return Observable(expr, expr.render(), kind="friction")


@dataclass(frozen=True)
class Dictionary:
    """Ordered set of observables over an n-dimensional state."""

    observables: tuple
    state_dim: int

    def __post_init__(self):
        if self.state_dim < 1:
            raise InputError("state_dim must be >= 1")
        if len(self.observables) < self.state_dim:
            raise InputError(
                f"dictionary needs at least state_dim={self.state_dim} observables, "
                f"got {len(self.observables)}"
            )
        for ob in self.observables:
            if _max_var_index(ob.expr) >= self.state_dim:
                raise InputError(
                    f"observable {ob.label!r} references a state beyond dimension {self.state_dim}"
                )
        labels = [ob.expr.render() for ob in self.observables]
        if len(set(labels)) != len(labels):
            dup = next(l for l in labels if labels.count(l) > 1)
            raise InputError(f"duplicate observable {dup!r} in dictionary")

    @property
    def size(self) -> int:
        return len(self.observables)

    @property
    def identity_prefix(self) -> bool:
        return all(
            isinstance(ob.expr, Var) and ob.expr.index == i
            for i, ob in enumerate(self.observables[: self.state_dim])
        )

    @property
    def labels(self) -> list:
        return [ob.label for ob in self.observables]

    def expressions(self) -> list:
        """Canonical expression strings, parseable by `parse_expression`."""
        return [ob.expr.render() for ob in self.observables]

    def lift(self, states: np.ndarray) -> np.ndarray:
        """Evaluate all observables on an n-by-M matrix of state columns."""
        states = np.asarray(states, dtype=float)
        if states.ndim != 2 or states.shape[0] != self.state_dim:
            raise InputError(
                f"expected a {self.state_dim}xM state matrix, got shape {states.shape}"
            )
        if not np.all(np.isfinite(states)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(states), axis=0))[0])
            raise InputError(f"non-finite state in column {bad}")
        cols = tuple(states[i] for i in range(self.state_dim))
        lifted = np.empty((self.size, states.shape[1]))
        for i, ob in enumerate(self.observables):
            lifted[i, :] = ob.expr.evaluate(cols)
        return lifted

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Evaluate all observables on a single state vector of length n."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.state_dim,):
            raise InputError(f"expected a state of length {self.state_dim}, got shape {x.shape}")
        return self.lift(x.reshape(-1, 1))[:, 0]

    @classmethod
    def from_expressions(cls, expressions: Sequence[str], state_dim: int) -> "Dictionary":
        return cls(
            observables=tuple(Observable.from_expression(e) for e in expressions),
            state_dim=state_dim,
        )


def projection_matrix(dictionary: Dictionary) -> np.ndarray:
    """The n-by-N block (I_n | 0) extracting the state from the lifted vector."""
    n, size = dictionary.state_dim, dictionary.size
    return np.hstack([np.eye(n), np.zeros((n, size - n))])


def project(matrix: np.ndarray, lifted: np.ndarray) -> np.ndarray:
    """Apply a projection matrix to a lifted vector (or N-by-M matrix)."""
    matrix = np.asarray(matrix, dtype=float)
    lifted = np.asarray(lifted, dtype=float)
    if lifted.shape[0] != matrix.shape[1]:
        raise InputError(
            f"lifted vector of length {lifted.shape[0]} does not match projection "
            f"with {matrix.shape[1]} columns"
        )
    return matrix @ lifted


# ---------------------------------------------------------------------------
# Generated dictionaries

_SYSTEMS = ("pendulum", "duffing", "golf", "identity", "polynomial")


@dataclass(frozen=True)
class DictionarySpec:
    """Deterministic recipe for a generated dictionary."""

    system: str
    size: int
    state_dim: int | None = None

    def to_dict(self) -> dict:
        out = {"system": self.system, "size": self.size}
        if self.state_dim is not None:
            out["state_dim"] = self.state_dim
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DictionarySpec":
        return cls(
            system=data["system"],
            size=int(data["size"]),
            state_dim=data.get("state_dim"),
        )


def _lie_closure(seeds, children, degree, size) -> list:
    """Grow a term list by differentiating entries along the vector field.

    Breadth-first: pop the oldest term, append its derivative's product terms
    that are not in the list yet. New terms from one derivative enter by
    descending total degree, ties by descending exponent tuple, which makes
    the result a pure function of the seeds. The closure is infinite for the
    systems handled here, so `size` is always reached.
    """
    entries = list(seeds)
    seen = set(entries)
    queue = deque(entries)
    while len(entries) < size and queue:
        term = queue.popleft()
        fresh = []
        for child in children(term):
            if child not in seen and child not in fresh:
                fresh.append(child)
        fresh.sort(key=lambda t: (-degree(t), tuple(-e for e in t)))
        for child in fresh:
            if len(entries) >= size:
                break
            entries.append(child)
            seen.add(child)
            queue.append(child)
    return entries


def _pendulum_dictionary(size: int) -> Dictionary:
    # Terms are sin(x1)^a cos(x1)^b x2^c triples; x1 itself is seeded
    # separately. Differentiating along x1' = x2, x2' = -sin(x1) - d*x2
    # maps (a,b,c) to (a-1,b+1,c+1), (a+1,b-1,c+1), (a+1,b,c-1); the damping
    # part reproduces the term itself. cos powers are reduced with
    # cos^2 = 1 - sin^2 so no Pythagorean linear dependence can enter.
    def children(term):
        if term == "x1":
            return [(0, 0, 1)]
        a, b, c = term
        raw = []
        if a:
            raw.append((a - 1, b + 1, c + 1))
        if b:
            raw.append((a + 1, b - 1, c + 1))
        if c:
            raw.append((a + 1, b, c - 1))
        out = []
        for p, q, r in raw:
            halves, q = divmod(q, 2)
            for j in range(halves + 1):
                out.append((p + 2 * j, q, r))
        return out

    def degree(term):
        return 0 if term == "x1" else sum(term)

    terms = _lie_closure(["x1", (0, 0, 1)], children, degree, size)
    observables = [_coordinate(0), _coordinate(1)]
    observables += [_trig_monomial(*t) for t in terms[2:]]
    return Dictionary(tuple(observables), state_dim=2)


def _duffing_dictionary(size: int) -> Dictionary:
    # x1^a x2^b terms closed under x1' = x2, x2' = x1 - x1^3 - d*x2.
    def children(term):
        a, b = term
        out = []
        if a:
            out.append((a - 1, b + 1))
        if b:
            out.append((a + 3, b - 1))
            out.append((a + 1, b - 1))
        return out

    terms = _lie_closure([(1, 0), (0, 1)], children, sum, size)
    observables = [_coordinate(0), _coordinate(1)]
    observables += [_monomial(t) for t in terms[2:]]
    return Dictionary(tuple(observables), state_dim=2)


def _golf_dictionary() -> Dictionary:
    from .dynamics import GolfParameters

    params = GolfParameters()
    sin_angle = Observable(Func("sin", Var(0)), "sin(x1)", kind="trig_monomial")
    friction = _friction_term(params.mass, params.gravity, params.com_length)
    return Dictionary(
        (_coordinate(0), _coordinate(1), sin_angle, friction), state_dim=2
    )


def _polynomial_dictionary(size: int, state_dim: int) -> Dictionary:
    observables = [_coordinate(i) for i in range(state_dim)]
    degree = 2
    while len(observables) < size:
        for exponents in _compositions(degree, state_dim):
            if len(observables) >= size:
                break
            observables.append(_monomial(exponents))
        degree += 1
    return Dictionary(tuple(observables[:size]), state_dim=state_dim)


def _compositions(total: int, parts: int) -> Iterator:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def build_dictionary(
    spec: DictionarySpec | str,
    size: int | None = None,
    state_dim: int | None = None,
) -> Dictionary:
    """Build a generated dictionary; the same spec always yields the same result.

    Systems: pendulum and duffing (state_dim 2, size >= 2) grow their
    observables by closing the coordinate functions under differentiation
    along the system's vector field, so every entry is a term the dynamics
    actually produce; golf is exactly 4 fixed observables; identity is
    size == state_dim coordinates; polynomial is coordinates plus monomials
    of ascending total degree.
    """
    if isinstance(spec, DictionarySpec):
        system, size, state_dim = spec.system, spec.size, spec.state_dim
    else:
        system = spec
        if size is None:
            raise InputError("size is required")
    if system not in _SYSTEMS:
        raise InputError(f"unknown system {system!r}; expected one of {_SYSTEMS}")
    if size < 1:
        raise InputError("dictionary size must be >= 1")

    if system == "pendulum":
        if size < 2:
            raise InputError("pendulum dictionary needs size >= 2")
        return _pendulum_dictionary(size)
    if system == "duffing":
        if size < 2:
            raise InputError("duffing dictionary needs size >= 2")
        return _duffing_dictionary(size)
    if system == "golf":
        if size != 4:
            raise InputError("golf dictionary is fixed at size 4")
        return _golf_dictionary()
    if system == "identity":
        n = state_dim if state_dim is not None else size
        if size != n:
            raise InputError("identity dictionary requires size == state_dim")
        return Dictionary(tuple(_coordinate(i) for i in range(n)), state_dim=n)
    # polynomial
    n = state_dim if state_dim is not None else 2
    if size < n:
        raise InputError("polynomial dictionary needs size >= state_dim")
    return _polynomial_dictionary(size, n)

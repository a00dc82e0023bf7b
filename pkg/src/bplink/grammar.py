"""Text forms of distributions, control maps and rates.

    dist     = name "(" [ arg { "," arg } ] ")"
             | "finite" "{" atom { "," atom } "}"
    arg      = ident "=" ( number | dist )
    atom     = integer ":" number
    map      = ident [ "(" [ arg { "," arg } ] ")" ]
             | "table" "{" [ entry { "," entry } ] [ ";" "default" "=" map ] "}"
    entry    = integer ":" integer
    rate     = number | "rate_catalog:" ident [ "(" [ arg { "," arg } ] ")" ]
    number   = [ "-" ] digits [ "." digits ] [ exponent ] | digits "/" digits

Integers and decimals parse to exact rationals; ``1/3`` is accepted too.
"""

from __future__ import annotations

import re
from typing import Mapping

from ._numbers import parse_number
from .distributions import (
    Bernoulli,
    Distribution,
    FiniteSupport,
    Geometric,
    NegativeBinomial,
    PointMass,
    Poisson,
    ScaledBernoulli,
    ZeroInflatedGeometric,
    ZeroInflatedPoisson,
    binomial,
    compound,
)
from .errors import ParseError, ValidationError
from .kernels import (
    AffineFloor,
    BevertonHoltRate,
    CapacityRate,
    ConstantRate,
    ControlMap,
    ExpGateRate,
    Identity,
    MaxShift,
    ParityHalf,
    Rate,
    ShiftGated,
    Table,
)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?(?:\d+/\d+|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[(){}=,:;]))"
)


def _binomial_text(n, p):
    if int(n) != n or n < 1:
        raise ValidationError(f"n={n!r} must be a positive integer", key="n")
    return binomial(int(n), p) if n > 1 else Bernoulli(p)


# name -> (constructor, required args in order, optional args with defaults)
DISTRIBUTIONS = {
    "point": (lambda c: PointMass(c), ("c",), {}),
    "bernoulli": (lambda p: Bernoulli(p), ("p",), {}),
    "binomial": (_binomial_text, ("n", "p"), {}),
    "poisson": (lambda mu: Poisson(mu), ("mu",), {}),
    "geometric": (lambda q: Geometric(q), ("q",), {}),
    "nb": (lambda r, q: NegativeBinomial(r, q), ("r", "q"), {}),
    "zip": (lambda pi0, lam: ZeroInflatedPoisson(pi0, lam), ("pi0", "lambda"), {}),
    "zig": (lambda p, q: ZeroInflatedGeometric(p, q), ("p", "q"), {}),
    "scaled_bernoulli": (lambda s, p: ScaledBernoulli(s, p), ("s", "p"), {}),
    "compound": (lambda count, summand: compound(count, summand), ("count", "summand"), {}),
}

MAPS = {
    "identity": (lambda: Identity(), (), {}),
    "parity_half": (lambda: ParityHalf(), (), {}),
    "affine_floor": (lambda a, b: AffineFloor(a, b), ("a",), {"b": 0}),
    "max_shift": (lambda c: MaxShift(c), ("c",), {}),
    "shift_gated": (lambda M: ShiftGated(M), ("M",), {}),
}

RATES = {
    "bh": (lambda K: BevertonHoltRate(K), ("K",), {}),
    "capacity": (lambda K, M, lam: CapacityRate(K, M, lam), ("K", "M", "lam"), {}),
    "exp_gate": (lambda scale: ExpGateRate(scale), ("scale",), {}),
    "const": (lambda q: ConstantRate(q), ("q",), {}),
}

# section keys a bare rate name may borrow its parameters from
_RATE_ALIASES = {"lam": ("lam", "lambda")}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", pos, ("name", "number", "punctuation"))
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", len(self.text))

    def take(self, kind=None, value=None, expected=None):
        tok = self.peek()
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = expected or ((repr(value),) if value is not None else (kind,))
            got = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise ParseError(f"found {got}", tok[2], tuple(want))
        self.i += 1
        return tok

    def at(self, value) -> bool:
        return self.peek()[1] == value and self.peek()[0] == "punct"

    def done(self):
        if self.peek()[0] != "eof":
            tok = self.peek()
            raise ParseError(f"trailing input {tok[1]!r}", tok[2], ("end of input",))

    def number(self):
        tok = self.take("num", expected=("number",))
        return parse_number(tok[1])

    def args(self, nested_dist: bool):
        out = {}
        if not self.at("("):
            return out
        self.take("punct", "(")
        if self.at(")"):
            self.take("punct", ")")
            return out
        while True:
            key = self.take("name", expected=("argument name",))
            self.take("punct", "=")
            if self.peek()[0] == "name" and nested_dist:
                out[key[1]] = self.distribution()
            else:
                out[key[1]] = self.number()
            if self.at(","):
                self.take("punct", ",")
                continue
            self.take("punct", ")", expected=("','", "')'"))
            return out

    def distribution(self) -> Distribution:
        tok = self.take("name", expected=tuple(sorted(DISTRIBUTIONS)) + ("finite",))
        name, pos = tok[1], tok[2]
        if name == "finite":
            self.take("punct", "{")
            table = {}
            while True:
                v = self.number()
                self.take("punct", ":")
                w = self.number()
                if v in table:
                    raise ValidationError(f"duplicate value {v} in finite law", key="finite")
                table[v] = w
                if self.at(","):
                    self.take("punct", ",")
                    continue
                self.take("punct", "}", expected=("','", "'}'"))
                break
            values = list(table)
            if values != sorted(values):
                raise ValidationError("finite law values must be increasing", key="finite")
            if any(int(v) != v for v in values):
                raise ValidationError("finite law values must be integers", key="finite")
            return FiniteSupport(tuple(int(v) for v in values), tuple(table.values()))
        if name not in DISTRIBUTIONS:
            raise ParseError(f"unknown distribution {name!r}", pos, tuple(sorted(DISTRIBUTIONS)) + ("finite",))
        if not self.at("("):
            raise ParseError("missing argument list", self.peek()[2], ("'('",))
        return _build(name, DISTRIBUTIONS[name], self.args(nested_dist=True))

    def control_map(self) -> ControlMap:
        tok = self.take("name", expected=tuple(sorted(MAPS)) + ("table",))
        name, pos = tok[1], tok[2]
        if name == "table":
            self.take("punct", "{")
            entries = {}
            default = Identity()
            while not self.at("}"):
                if self.at(";"):
                    self.take("punct", ";")
                    self.take("name", "default")
                    self.take("punct", "=")
                    default = self.control_map()
                    break
                k = self.number()
                self.take("punct", ":")
                entries[int(k)] = self.number()
                if self.at(","):
                    self.take("punct", ",")
            self.take("punct", "}")
            return Table(entries, default)
        if name not in MAPS:
            raise ParseError(f"unknown control map {name!r}", pos, tuple(sorted(MAPS)) + ("table",))
        return _build(name, MAPS[name], self.args(nested_dist=False))

    def rate(self, context: Mapping[str, object]) -> Rate:
        if self.peek()[0] == "num":
            return ConstantRate(self.number())
        tok = self.take("name", "rate_catalog", expected=("number", "rate_catalog:<name>"))
        self.take("punct", ":")
        tok = self.take("name", expected=tuple(sorted(RATES)))
        name, pos = tok[1], tok[2]
        if name not in RATES:
            raise ParseError(f"unknown rate {name!r}", pos, tuple(sorted(RATES)))
        args = self.args(nested_dist=False)
        _, required, _ = RATES[name]
        for key in required:
            if key not in args:
                for alias in _RATE_ALIASES.get(key, (key,)):
                    if alias in context:
                        args[key] = context[alias]
                        break
        return _build(name, RATES[name], args)


def _build(name, entry, args):
    ctor, required, optional = entry
    allowed = set(required) | set(optional)
    for key in args:
        if key not in allowed:
            raise ValidationError(f"{name} does not take {key!r} (takes {', '.join(sorted(allowed)) or 'nothing'})", key=key)
    missing = [k for k in required if k not in args]
    if missing:
        raise ValidationError(f"{name} is missing {', '.join(missing)}", key=missing[0])
    values = [args[k] for k in required] + [args.get(k, v) for k, v in optional.items()]
    return ctor(*values)


def parse_distribution(text: str) -> Distribution:
    p = _Parser(text)
    d = p.distribution()
    p.done()
    return d


def parse_map(text: str) -> ControlMap:
    p = _Parser(text)
    m = p.control_map()
    p.done()
    return m


def parse_rate(text: str, context: Mapping[str, object] | None = None) -> Rate:
    p = _Parser(text)
    r = p.rate(context or {})
    p.done()
    return r

"""Run configuration files.

A config is a list of sections, each a header followed by ``key=value``
items. Items may sit on the header line or on following lines, several per
line separated by whitespace; ``#`` starts a comment::

    [process.a] kind=psdbp family=binomial_bh K=100
    [process.b]
    kind=cbp control=binomial psi=shift_gated(M=2) q=rate_catalog:capacity
    K=100 M=2 lambda=3 offspring=poisson(mu=3)
    [run] command=tvd k=1 N=1000000 seed=42

Values are canonicalized on parse (``poisson(mu=3.0)`` becomes
``poisson(mu=3)``) and every run option is filled with its default, so
``parse_config(format_config(cfg)) == cfg``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ._numbers import format_number, parse_number
from .distributions import DEFAULT_TAIL_TOL
from .errors import ParseError, ValidationError
from .grammar import parse_distribution, parse_map, parse_rate
from .kernels import (
    CBP,
    FAMILIES,
    PSDBP,
    BinomialControl,
    ConstantOffspring,
    Deterministic,
    NegBinControl,
    PoissonControl,
    ScaledBernoulliControl,
    Tabulated,
)

COMMANDS = ("simulate", "moments", "equivalence", "match", "bound", "tvd")

# config key -> constructor keyword, per family
FAMILY_KEYS = {
    "binomial_bh": {"K": "K"},
    "poisson_scaled": {"lambda": "lam"},
    "nb_capacity": {"lambda": "lam", "M": "M", "K": "K"},
    "nb_shift": {"lambda": "lam", "M": "M"},
    "three_point": {},
    "ricker_poisson": {"r": "r", "K": "K"},
    "constant": {"offspring": "offspring"},
    "tabulated": {},
}

# control -> (map key, rate key or None)
CONTROL_KEYS = {
    "deterministic": ("phi", None),
    "poisson": ("psi", None),
    "binomial": ("psi", "q"),
    "negbin": ("psi", "q"),
    "scaled_bernoulli": ("s", "p"),
}

_DIST_KEYS = {"offspring", "default"}
_MAP_KEYS = {"phi", "psi", "s"}
_RATE_KEYS = {"q", "p"}
_ENUM_KEYS = {"kind", "family", "control"}
# numeric parameters that rates may borrow and that a K sweep may override
_PARAM_KEYS = {"K", "M", "lambda", "lam", "r", "scale"}

# option -> (type, default); types: int, number, grid, bool, or a tuple of choices
RUN_OPTIONS = {
    "command": (COMMANDS, "simulate"),
    "z0": ("int", "1"),
    "generations": ("int", "100"),
    "paths": ("int", "1"),
    "seed": ("int", "0"),
    "K": ("grid", ""),
    "k": ("grid", "1"),
    "z0_rule": (("one", "capacity", "both"), "capacity"),
    "N": ("int", "100000"),
    "side": (("psdbp", "cbp"), "psdbp"),
    "alpha": ("number", "0.5"),
    "cap": ("int", "200"),
    "x_cap": ("int", "10000"),
    "tail_tol": ("number", format_number(parse_number(repr(DEFAULT_TAIL_TOL)))),
    "z": ("grid", "1..500"),
    "z_eval": ("grid", "1,10,100,1000,10000"),
    "audit": ("bool", "true"),
    "format": (("csv", "json"), "csv"),
    "output": ("text", ""),
    "plot": ("bool", "false"),
}

_SECTION = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_.]*)\]")
_GRID_PART = re.compile(r"^(\d+)(?:\.\.(\d+))?$")


def parse_grid(text: str) -> list[int]:
    """``10,25,50`` or ``1..500`` (inclusive) or a mix: ``1,5..8``."""
    out = []
    if text == "":
        return out
    for part in text.split(","):
        m = _GRID_PART.match(part)
        if not m:
            raise ValueError(f"bad grid item {part!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if hi < lo:
            raise ValueError(f"empty range {part!r}")
        out.extend(range(lo, hi + 1))
    return sorted(set(out))


@dataclass
class RunConfig:
    command: str
    processes: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    # typed access to run options
    def integer(self, key: str) -> int:
        return int(self.options[key])

    def number(self, key: str):
        return parse_number(self.options[key])

    def grid(self, key: str) -> list[int]:
        return parse_grid(self.options[key])

    def flag(self, key: str) -> bool:
        return self.options[key] == "true"

    def process(self, name: str, **overrides):
        """Build the process in section ``process.<name>``, with numeric keys overridden."""
        items = dict(self.processes[name])
        for k, v in overrides.items():
            items[k] = format_number(v)
        return build_process(items, name, self.lines.get(name, {}))

    def with_options(self, **updates) -> "RunConfig":
        """Copy with run options replaced; values are validated like config text."""
        options = dict(self.options)
        for k, v in updates.items():
            if v is None:
                continue
            if isinstance(v, bool):
                v = "true" if v else "false"
            options[k] = _canonical_option(k, str(v), None)
        return RunConfig(options["command"], self.processes, options, self.lines)


def _split_items(text: str, line: int) -> list[str]:
    """Split on whitespace outside brackets after gluing ``key = value`` together."""
    text = re.sub(r"\s*=\s*", "=", text)
    items, depth, cur = [], 0, ""
    for ch in text:
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        if ch.isspace() and depth == 0:
            if cur:
                items.append(cur)
            cur = ""
        else:
            cur += ch
    if depth != 0:
        raise ParseError("unbalanced brackets", None, ("')'", "'}'"), line)
    if cur:
        items.append(cur)
    return items


def _canonical_option(key: str, value: str, line):
    if key not in RUN_OPTIONS:
        raise ValidationError(f"unknown run option (known: {', '.join(RUN_OPTIONS)})", key, line)
    kind, _ = RUN_OPTIONS[key]
    try:
        if isinstance(kind, tuple):
            if value not in kind:
                raise ValueError(f"must be one of {', '.join(kind)}")
            return value
        if kind == "int":
            n = parse_number(value)
            if int(n) != n or n < 0:
                raise ValueError("must be a non-negative integer")
            return str(int(n))
        if kind == "number":
            return format_number(parse_number(value))
        if kind == "grid":
            return ",".join(str(x) for x in parse_grid(value)) if ".." not in value else value
        if kind == "bool":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError("must be true or false")
            return "true" if value.lower() in ("true", "1", "yes") else "false"
        return value
    except ValueError as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(str(e), key, line) from None


def _check_ranges(options: dict, line_of: dict) -> None:
    def fail(key, msg):
        raise ValidationError(msg, key, line_of.get(key))

    alpha = parse_number(options["alpha"])
    if not 0 < alpha < 1:
        fail("alpha", "must lie in (0, 1)")
    tol = parse_number(options["tail_tol"])
    if not 0 < tol <= parse_number("1e-6"):
        fail("tail_tol", "must lie in (0, 1e-6]")
    for key in ("generations", "paths", "N", "cap"):
        if int(options[key]) < 1:
            fail(key, "must be >= 1")
    if not parse_grid(options["k"]) or min(parse_grid(options["k"])) < 1:
        fail("k", "path lengths must be >= 1")
    if options["K"] and min(parse_grid(options["K"])) < 1:
        fail("K", "carrying capacities must be >= 1")


def _canonical_value(key: str, value: str, context: dict):
    if key in _DIST_KEYS or key.startswith("at."):
        return parse_distribution(value).to_text()
    if key in _MAP_KEYS:
        return parse_map(value).to_text()
    if key in _RATE_KEYS:
        rate = parse_rate(value, context)
        # a bare catalog name keeps borrowing from the section (and from K sweeps)
        return value if re.fullmatch(r"rate_catalog:\w+", value) else rate.to_text()
    if key in _ENUM_KEYS:
        return value
    try:
        return format_number(parse_number(value))
    except ValueError:
        raise ValidationError(f"expected a number, got {value!r}", key) from None


def build_process(items: dict, name: str = "?", lines: dict | None = None):
    """A PSDBP or CBP from canonical section items; raises ValidationError naming key and line."""
    lines = lines or {}

    def fail(key, msg):
        raise ValidationError(f"[process.{name}] {msg}", key, lines.get(key))

    def get(key):
        if key not in items:
            fail(key, "missing key")
        return items[key]

    context = {}
    for k, v in items.items():
        if k in _PARAM_KEYS:
            try:
                context[k] = parse_number(v)
            except ValueError:
                fail(k, f"expected a number, got {v!r}")

    def parsed(key, parser, *args):
        try:
            return parser(get(key), *args)
        except ParseError as e:
            raise ParseError(f"[process.{name}] {key}: {e}", None, (), lines.get(key)) from None
        except ValidationError as e:
            raise ValidationError(f"[process.{name}] {e.message}", key, lines.get(key)) from None

    kind = get("kind")
    if kind == "psdbp":
        family = get("family")
        if family not in FAMILY_KEYS:
            fail("family", f"unknown family {family!r} (known: {', '.join(FAMILY_KEYS)})")
        allowed = {"kind", "family"} | set(FAMILY_KEYS[family])
        if family == "tabulated":
            allowed |= {"default"} | {k for k in items if k.startswith("at.")}
        for k in items:
            if k not in allowed:
                fail(k, f"not a parameter of family {family} (takes {', '.join(sorted(allowed - {'kind', 'family'})) or 'nothing'})")
        if family == "tabulated":
            entries = {}
            for k in items:
                if k.startswith("at."):
                    try:
                        z = int(k[3:])
                    except ValueError:
                        fail(k, "tabulated keys look like at.<state>")
                    entries[z] = parsed(k, parse_distribution)
            default = ConstantOffspring(parsed("default", parse_distribution)) if "default" in items else None
            return PSDBP(Tabulated(entries, default))
        kwargs = {}
        for key, kw in FAMILY_KEYS[family].items():
            kwargs[kw] = parsed(key, parse_distribution) if key == "offspring" else context.get(key, None)
            if kwargs[kw] is None:
                fail(key, "missing key")
        try:
            return PSDBP(FAMILIES[family](**kwargs))
        except ValidationError as e:
            raise ValidationError(f"[process.{name}] {e.message}", e.key, lines.get(e.key) if e.key else None) from None
    if kind == "cbp":
        control = get("control")
        if control not in CONTROL_KEYS:
            fail("control", f"unknown control {control!r} (known: {', '.join(CONTROL_KEYS)})")
        map_key, rate_key = CONTROL_KEYS[control]
        allowed = {"kind", "control", "offspring", map_key} | _PARAM_KEYS
        if rate_key:
            allowed.add(rate_key)
        for k in items:
            if k not in allowed:
                fail(k, f"not a key of a {control} control")
        cmap = parsed(map_key, parse_map)
        rate = parsed(rate_key, parse_rate, context) if rate_key else None
        offspring = parsed("offspring", parse_distribution)
        ctor = {
            "deterministic": lambda: Deterministic(cmap),
            "poisson": lambda: PoissonControl(cmap),
            "binomial": lambda: BinomialControl(cmap, rate),
            "negbin": lambda: NegBinControl(cmap, rate),
            "scaled_bernoulli": lambda: ScaledBernoulliControl(cmap, rate),
        }[control]
        return CBP(ctor(), offspring)
    fail("kind", f"kind must be psdbp or cbp, got {kind!r}")


def parse_config(text: str) -> RunConfig:
    processes: dict[str, dict] = {}
    proc_lines: dict[str, dict] = {}
    options: dict[str, str] = {}
    option_lines: dict[str, int] = {}
    section = None
    seen_run = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = _SECTION.match(body)
        if m:
            name = m.group(1)
            if name == "run":
                if seen_run:
                    raise ValidationError("duplicate [run] section", None, lineno)
                seen_run = True
                section = "run"
            elif name.startswith("process.") and len(name) > len("process."):
                section = name[len("process."):]
                if section in processes:
                    raise ValidationError(f"duplicate section [{name}]", None, lineno)
                processes[section] = {}
                proc_lines[section] = {}
            else:
                raise ParseError(f"unknown section [{name}]", 0, ("[process.<name>]", "[run]"), lineno)
            body = body[m.end():]
        for item in _split_items(body, lineno):
            if section is None:
                raise ParseError("key=value before any section", 0, ("[process.<name>]", "[run]"), lineno)
            if "=" not in item:
                raise ParseError(f"expected key=value, found {item!r}", raw.find(item), ("key=value",), lineno)
            key, value = item.split("=", 1)
            if not key or not value:
                raise ParseError(f"empty key or value in {item!r}", raw.find(item), ("key=value",), lineno)
            target, where = (options, option_lines) if section == "run" else (processes[section], proc_lines[section])
            if key in target:
                raise ValidationError("duplicate key", key, lineno)
            target[key] = value
            where[key] = lineno

    if not processes:
        raise ValidationError("config defines no [process.<name>] section")
    canon_processes = {}
    for name, items in processes.items():
        lines = proc_lines[name]
        context = {}
        for k, v in items.items():
            if k in _PARAM_KEYS:
                try:
                    context[k] = parse_number(v)
                except ValueError:
                    raise ValidationError(f"expected a number, got {v!r}", k, lines[k]) from None
        canon = {}
        for k, v in items.items():
            try:
                canon[k] = _canonical_value(k, v, context)
            except ParseError as e:
                raise ParseError(f"[process.{name}] {k}: {e}", None, (), lines[k]) from None
            except ValidationError as e:
                raise ValidationError(f"[process.{name}] {e.message}", k, lines[k]) from None
        build_process(canon, name, lines)
        canon_processes[name] = canon

    resolved = {}
    for key, value in options.items():
        resolved[key] = _canonical_option(key, value, option_lines[key])
    for key, (_, default) in RUN_OPTIONS.items():
        resolved.setdefault(key, default)
    _check_ranges(resolved, option_lines)
    lines = {name: proc_lines[name] for name in proc_lines}
    return RunConfig(resolved["command"], canon_processes, resolved, lines)


def format_config(config: RunConfig) -> str:
    out = []
    for name, items in config.processes.items():
        out.append(f"[process.{name}]")
        out.extend(f"{k}={v}" for k, v in items.items())
    out.append("[run]")
    out.extend(f"{k}={config.options[k]}" for k in RUN_OPTIONS if config.options.get(k, "") != "")
    return "\n".join(out) + "\n"


def header(config: RunConfig) -> str:
    """The resolved config as ``# `` comment lines, for the top of CSV outputs."""
    return "".join(f"# {line}\n" for line in format_config(config).splitlines())


def config_from_header(text: str) -> RunConfig:
    lines = []
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        lines.append(line[2:] if line.startswith("# ") else line[1:])
    return parse_config("\n".join(lines))

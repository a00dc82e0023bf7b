"""Command-line front end.

Processes are described in a config file (see ``bplink.config``); the
distribution, control-map and rate values inside it use this text grammar::

    dist     = name "(" [ arg { "," arg } ] ")"
             | "finite" "{" atom { "," atom } "}"
    arg      = ident "=" ( number | dist )
    atom     = integer ":" number
    map      = ident [ "(" [ arg { "," arg } ] ")" ]
             | "table" "{" [ entry { "," entry } ] [ ";" "default" "=" map ] "}"
    entry    = integer ":" integer
    rate     = number | "rate_catalog:" ident [ "(" [ arg { "," arg } ] ")" ]
    number   = [ "-" ] digits [ "." digits ] [ exponent ] | digits "/" digits

Distributions: point(c), bernoulli(p), binomial(n,p), poisson(mu),
geometric(q), nb(r,q), zip(pi0,lambda), zig(p,q), scaled_bernoulli(s,p),
compound(count=dist,summand=dist), finite{v:w,...}.
Maps: identity, parity_half, affine_floor(a,b), max_shift(c), shift_gated(M),
table{z:v,...;default=map}.
Rates: a constant, or rate_catalog:bh(K), capacity(K,M,lam), exp_gate(scale),
const(q); a bare catalog name takes its parameters from the section.

Exit status: 0 success, 1 any other library error, 2 parse or validation
error (or an unreadable file), 3 numeric failure, 4 a verdict other than yes
under ``--expect yes``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from ._numbers import format_number
from .bounds import SWEEP_HEADER as BOUND_HEADER
from .bounds import bound_sweep, certify_regularity
from .config import RunConfig, format_config, header, parse_config
from .equivalence import decide_equivalence
from .errors import BplinkError, NumericFailure, ParseError, ValidationError
from .estimator import SWEEP_HEADER, ProcessPair, default_workers, estimate_path_tvd, sweep
from .kernels import CBP, PSDBP, conditional_moments, simulate, trajectories_csv
from .matching import check_match, match_dcbp_to_psdbp, match_psdbp_to_dcbp
from .rng import derive_seed
from .svg import line_chart

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_EXPECT = 0, 2, 3, 4

FIGURES = {
    "fig1": """\
[process.bh] kind=psdbp family=binomial_bh K=100
[run] command=simulate z0=10 generations=1000 paths=1 seed=1
""",
    "fig2": """\
[process.immigration]
kind=cbp control=scaled_bernoulli s=affine_floor(a=1,b=1) p=rate_catalog:exp_gate scale=1000
offspring=binomial(n=5,p=1/5)
[run] command=simulate z0=1 generations=300 paths=1 seed=1
""",
    "fig3": """\
[process.psdbp] kind=psdbp family=three_point
[process.dcbp] kind=cbp control=deterministic phi=max_shift(c=1) offspring=binomial(n=2,p=1/2)
[run] command=simulate z0=1000 generations=1000 paths=10 seed=1
""",
    "fig4": """\
[process.psdbp] kind=psdbp family=nb_capacity lambda=3 M=2 K=1
[process.cbp]
kind=cbp control=binomial psi=shift_gated(M=2) q=rate_catalog:capacity
K=1 M=2 lambda=3 offspring=poisson(mu=3)
[run] command=tvd K=1..200 k=1,2,5 N=1000000 seed=1
""",
}
FIG4_RULES = {"fig4_z0_one": "one", "fig4_z0_K": "capacity"}


# ------------------------------------------------------------------ helpers ---


def _processes(cfg: RunConfig, **overrides) -> dict:
    return {name: cfg.process(name, **overrides) for name in cfg.processes}


def _pair_names(cfg: RunConfig) -> tuple[str, str]:
    """(PSDBP-side name, CBP-side name): by kind when the kinds differ, else by order."""
    names = list(cfg.processes)
    if len(names) != 2:
        raise ValidationError(f"command {cfg.command} needs exactly two processes, found {len(names)}")
    kinds = [cfg.processes[n]["kind"] for n in names]
    if kinds == ["cbp", "psdbp"]:
        names.reverse()
    return names[0], names[1]


def _tail_tol(cfg: RunConfig) -> float:
    return float(cfg.number("tail_tol"))


def _csv(cfg: RunConfig, body: str) -> str:
    return header(cfg) + body


def _json(cfg: RunConfig, payload) -> str:
    return json.dumps({"config": format_config(cfg), "seed": cfg.integer("seed"), "result": payload}, indent=2) + "\n"


def _csv_to_records(body: str) -> list[dict]:
    lines = body.strip().splitlines()
    keys = lines[0].split(",")
    out = []
    for line in lines[1:]:
        rec = {}
        for k, v in zip(keys, line.split(",")):
            try:
                rec[k] = int(v)
            except ValueError:
                try:
                    rec[k] = float(v)
                except ValueError:
                    rec[k] = v
        out.append(rec)
    return out


class Result:
    """What a command produced: a CSV body or JSON payload, an optional chart, and a pass flag."""

    def __init__(self, csv_body: str | None = None, payload=None, chart: str | None = None, passed: bool = True):
        self.csv_body = csv_body
        self.payload = payload
        self.chart = chart
        self.passed = passed

    def render(self, cfg: RunConfig) -> str:
        if self.csv_body is not None and cfg.options["format"] == "csv":
            return _csv(cfg, self.csv_body)
        payload = self.payload if self.payload is not None else _csv_to_records(self.csv_body)
        return _json(cfg, payload)


# ----------------------------------------------------------------- commands ---


def cmd_simulate(cfg: RunConfig, workers: int) -> Result:
    """Trajectories of every process; process i takes path ids i*paths .. (i+1)*paths-1."""
    seed, z0 = cfg.integer("seed"), cfg.integer("z0")
    gens, paths = cfg.integer("generations"), cfg.integer("paths")
    blocks, series = [], []
    for i, (name, spec) in enumerate(_processes(cfg).items()):
        traj = simulate(spec, z0, gens, paths, derive_seed(seed, i), workers)
        blocks.append(traj)
        xs = list(range(gens + 1))
        series.extend((f"{name} {p}", xs, [float(v) for v in row]) for p, row in enumerate(traj))
    body = trajectories_csv(np.vstack(blocks))
    chart = line_chart(series, "simulated trajectories", "generation", "population size") if cfg.flag("plot") else None
    return Result(body, chart=chart)


def cmd_moments(cfg: RunConfig, workers: int) -> Result:
    lines = ["process,z,mean,variance"]
    series = []
    for name, spec in _processes(cfg).items():
        zs, means = [], []
        for z in cfg.grid("z"):
            m, v = conditional_moments(spec, z)
            lines.append(f"{name},{z},{format_number(m)},{format_number(v)}")
            zs.append(z)
            means.append(float(m))
        series.append((name, zs, means))
    chart = line_chart(series, "conditional mean of the next generation", "z", "mean") if cfg.flag("plot") else None
    return Result("\n".join(lines) + "\n", chart=chart)


def cmd_equivalence(cfg: RunConfig, workers: int) -> Result:
    out = {}
    passed = True
    for name, spec in _processes(cfg).items():
        if not isinstance(spec, CBP):
            continue
        v = decide_equivalence(spec, cfg.integer("z0"), cfg.integer("cap"), cfg.flag("audit"), _tail_tol(cfg))
        out[name] = v.to_dict()
        passed = passed and v.outcome == "yes"
    if not out:
        raise ValidationError("equivalence needs at least one cbp process")
    return Result(payload=out, passed=passed)


def cmd_match(cfg: RunConfig, workers: int) -> Result:
    out = {}
    passed = True
    procs = _processes(cfg)
    for name, spec in procs.items():
        if isinstance(spec, PSDBP):
            report = match_dcbp_to_psdbp(spec, cfg.integer("z0"), cfg.integer("cap"), cfg.integer("x_cap"))
        elif spec.is_dcbp:
            report = match_psdbp_to_dcbp(spec, cfg.integer("z0"), cfg.integer("cap"))
        else:
            raise ValidationError(f"process {name}: matching needs a PSDBP or a deterministic-control CBP")
        out[name] = report.to_dict()
        passed = passed and report.feasible
    if len(procs) == 2:
        a, b = _pair_names(cfg)
        chk = check_match(procs[a], procs[b], cfg.grid("z"))
        out["pair"] = {
            "processes": [a, b],
            "moments_match": chk.ok,
            "first_failure": chk.first_failure,
            "max_relative_residual": chk.max_residual,
        }
        passed = passed and chk.ok
    return Result(payload=out, passed=passed)


def cmd_bound(cfg: RunConfig, workers: int) -> Result:
    procs = _processes(cfg)
    psdbp = next((s for s in procs.values() if isinstance(s, PSDBP)), None)
    dcbp = next((s for s in procs.values() if isinstance(s, CBP) and s.is_dcbp), None)
    if psdbp is None or dcbp is None:
        raise ValidationError("bound needs one psdbp and one deterministic-control cbp process")
    cert = certify_regularity(psdbp, dcbp, cfg.grid("z"), _tail_tol(cfg))
    if not cert.valid:
        cond, witness, detail = cert.violations[0]
        raise ValidationError(f"regularity condition {cond} fails at z={witness}: {detail}")
    alpha = float(cfg.number("alpha"))
    rows = bound_sweep(cert, cfg.grid("z_eval"), cfg.grid("k"), alpha)
    keys = BOUND_HEADER.split(",")
    lines = [BOUND_HEADER] + [",".join(_cell(r[k]) for k in keys) for r in rows]
    chart = None
    if cfg.flag("plot"):
        series = []
        for k in cfg.grid("k"):
            pts = [(r["z"], r["effective_bound"]) for r in rows if r["k"] == k]
            series.append((f"k={k}", [p[0] for p in pts], [p[1] for p in pts]))
        chart = line_chart(series, "effective TVD bound", "z", "bound", logx=True, markers=True)
    return Result("\n".join(lines) + "\n", chart=chart)


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else "nan"
    return str(v)


def cmd_tvd(cfg: RunConfig, workers: int) -> Result:
    a, b = _pair_names(cfg)
    seed, N, side = cfg.integer("seed"), cfg.integer("N"), cfg.options["side"]
    tol = _tail_tol(cfg)
    Ks = cfg.grid("K")
    if not Ks:
        pair = ProcessPair(cfg.process(a), cfg.process(b), tol)
        lines = ["k,z0,N,seed,tvd_estimate,stderr"]
        for k in cfg.grid("k"):
            s = derive_seed(seed, k)
            est = estimate_path_tvd(pair, cfg.integer("z0"), k, N, s, side, workers)
            lines.append(f"{k},{est.z0},{N},{s},{est.value!r},{est.stderr!r}")
        return Result("\n".join(lines) + "\n")
    if not any("K" in cfg.processes[n] for n in (a, b)):
        raise ValidationError("a K grid needs a process with a K parameter", key="K")

    def family(K):
        return ProcessPair(
            cfg.process(a, **({"K": K} if "K" in cfg.processes[a] else {})),
            cfg.process(b, **({"K": K} if "K" in cfg.processes[b] else {})),
            tol,
        )

    rules = ["one", "capacity"] if cfg.options["z0_rule"] == "both" else [cfg.options["z0_rule"]]
    rows = []
    for rule in rules:
        rows.extend(sweep(family, Ks, cfg.grid("k"), rule, N, seed, side, workers))
    rows.sort(key=lambda r: (r.K, r.k, r.z0))
    lines = [SWEEP_HEADER] + [f"{r.K},{r.k},{r.z0},{r.N},{r.seed},{r.tvd_estimate!r},{r.stderr!r}" for r in rows]
    chart = None
    if cfg.flag("plot"):
        series = []
        for rule in rules:
            for k in cfg.grid("k"):
                pts = [r for r in rows if r.k == k and (r.z0 == 1 if rule == "one" else r.z0 == r.K)]
                label = f"k={k}, z0={'1' if rule == 'one' else 'K'}"
                series.append((label, [r.K for r in pts], [r.tvd_estimate for r in pts]))
        chart = line_chart(series, "estimated k-step TVD", "K", "TVD", markers=True)
    return Result("\n".join(lines) + "\n", chart=chart)


COMMANDS = {
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "equivalence": cmd_equivalence,
    "match": cmd_match,
    "bound": cmd_bound,
    "tvd": cmd_tvd,
}


def run(cfg: RunConfig, workers: int | None = None) -> Result:
    return COMMANDS[cfg.command](cfg, default_workers() if workers is None else workers)


def _write(cfg: RunConfig, result: Result, out=None) -> None:
    text = result.render(cfg)
    target = cfg.options["output"]
    if not target:
        (out or sys.stdout).write(text)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    if result.chart is not None:
        path.with_suffix(".svg").write_text(result.chart)


# ----------------------------------------------------------------- figures ---


def figure_configs(name: str, scale: float = 1.0, seed: int | None = None) -> dict[str, RunConfig]:
    """Output stem -> config for one figure; ``scale`` shrinks the replicate count N."""
    if name not in FIGURES:
        raise ValidationError(f"unknown figure {name!r} (known: {', '.join(FIGURES)})")
    if not 0 < scale <= 1:
        raise ValidationError("scale must lie in (0, 1]", key="scale")
    cfg = parse_config(FIGURES[name])
    if seed is not None:
        cfg = cfg.with_options(seed=seed)
    if name != "fig4":
        return {name: cfg}
    cfg = cfg.with_options(N=max(100, round(cfg.integer("N") * scale)))
    return {stem: cfg.with_options(z0_rule=rule) for stem, rule in FIG4_RULES.items()}


# --------------------------------------------------------------------- main ---


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bplink", description="Branching-process kernels, equivalence, matching, bounds and TVD estimation.")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: $BPLINK_WORKERS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("config", help="config file, or - for stdin")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--z0", type=int)
        sp.add_argument("--generations", type=int)
        sp.add_argument("--paths", type=int)
        sp.add_argument("--N", type=int)
        sp.add_argument("--k", help="path lengths, e.g. 1,2,5")
        sp.add_argument("--K", help="carrying-capacity grid, e.g. 10,50 or 1..200")
        sp.add_argument("--z0-rule", choices=("one", "capacity", "both"))
        sp.add_argument("--side", choices=("psdbp", "cbp"))
        sp.add_argument("--alpha")
        sp.add_argument("--cap", type=int)
        sp.add_argument("--output", "-o")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--plot", action="store_true", default=None)
        sp.add_argument("--expect", choices=("yes",), help="exit 4 unless every verdict is yes")

    run_flags(sub.add_parser("run", help="run the command named in the config's [run] section"))
    for name in COMMANDS:
        run_flags(sub.add_parser(name, help=f"run {name} on a config"))
    fig = sub.add_parser("figure", help="write the data behind one of the built-in figures")
    fig.add_argument("name", choices=sorted(FIGURES))
    fig.add_argument("--scale", type=float, default=1.0, help="fraction of the full replicate count")
    fig.add_argument("--seed", type=int)
    fig.add_argument("--output", "-o", default=".", help="output directory")
    fig.add_argument("--plot", action="store_true")
    return p


def _load(args) -> RunConfig:
    text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
    cfg = parse_config(text)
    updates = {
        "seed": args.seed,
        "z0": args.z0,
        "generations": args.generations,
        "paths": args.paths,
        "N": args.N,
        "k": args.k,
        "K": args.K,
        "z0_rule": args.z0_rule,
        "side": args.side,
        "alpha": args.alpha,
        "cap": args.cap,
        "output": args.output,
        "format": args.format,
        "plot": args.plot,
    }
    if args.command != "run":
        updates["command"] = args.command
    return cfg.with_options(**updates)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "figure":
            outdir = Path(args.output)
            outdir.mkdir(parents=True, exist_ok=True)
            for stem, cfg in figure_configs(args.name, args.scale, args.seed).items():
                cfg = cfg.with_options(output=str(outdir / f"{stem}.csv"), plot=args.plot)
                _write(cfg, run(cfg, args.workers))
                print(outdir / f"{stem}.csv")
            return EXIT_OK
        cfg = _load(args)
        result = run(cfg, args.workers)
        _write(cfg, result)
        if args.expect == "yes" and not result.passed:
            print("expected yes, got a different verdict", file=sys.stderr)
            return EXIT_EXPECT
        return EXIT_OK
    except (ParseError, ValidationError) as e:
        print(f"bplink: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NumericFailure as e:
        print(f"bplink: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except BplinkError as e:
        print(f"bplink: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"bplink: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

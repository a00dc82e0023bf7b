from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bplink.catalog import capacity_pair
from bplink.cli import FIGURES
from bplink.config import config_from_header, format_config, header, parse_config, parse_grid
from bplink.distributions import Binomial, FiniteSupport, NegativeBinomial, Poisson, compound
from bplink.errors import ParseError, ValidationError
from bplink.grammar import parse_distribution, parse_map, parse_rate
from bplink.kernels import (
    CBP,
    PSDBP,
    AffineFloor,
    BevertonHoltBinomial,
    CapacityRate,
    ConstantRate,
    Identity,
    MaxShift,
    ShiftGated,
    Table,
)

F = Fraction

EXAMPLE = """
# two processes sharing a carrying capacity
[process.a] kind=psdbp family=binomial_bh K=100
[process.b]
kind=cbp control=binomial psi=shift_gated(M=2) q=rate_catalog:capacity
K=100 M=2 lambda=3 offspring=poisson(mu=3.0)   # trailing comment
[run] command=tvd k=1 N=1000000 seed=42
"""


# ----------------------------------------------------------------- grammar ---


def test_distribution_texts():
    assert parse_distribution("poisson(mu=3)") == Poisson(3)
    assert parse_distribution("binomial(n=2, p=1/2)") == Binomial(2, F(1, 2))
    assert parse_distribution("nb(r=0.5,q=0.25)") == NegativeBinomial(F(1, 2), F(1, 4))
    assert parse_distribution("finite{0:0.25,1:0.5,2:0.25}") == FiniteSupport((0, 1, 2), (F(1, 4), F(1, 2), F(1, 4)))
    c = parse_distribution("compound(count=poisson(mu=2),summand=bernoulli(p=1/2))")
    assert c == compound(Poisson(2), parse_distribution("bernoulli(p=1/2)"))


def test_map_and_rate_texts():
    assert parse_map("identity") == Identity()
    assert parse_map("max_shift(c=1)") == MaxShift(1)
    assert parse_map("affine_floor(a=1/2)") == AffineFloor(F(1, 2), 0)
    assert parse_map("table{0:1,3:7;default=shift_gated(M=2)}") == Table({0: 1, 3: 7}, ShiftGated(2))
    assert parse_rate("0.5") == ConstantRate(F(1, 2))
    assert parse_rate("rate_catalog:capacity", {"K": 10, "M": 2, "lambda": 3}) == CapacityRate(10, 2, 3)
    assert parse_rate("rate_catalog:capacity(K=5,M=1,lam=2)") == CapacityRate(5, 1, 2)


def test_grammar_errors_carry_position_and_expectations():
    with pytest.raises(ParseError) as e:
        parse_distribution("poisson(mu=3")
    assert e.value.position == len("poisson(mu=3") and "')'" in e.value.expected
    with pytest.raises(ParseError) as e:
        parse_distribution("poison(mu=3)")
    assert e.value.position == 0 and "poisson" in e.value.expected
    with pytest.raises(ParseError):
        parse_distribution("poisson(mu=3) extra")
    with pytest.raises(ParseError):
        parse_distribution("poisson(mu=$)")
    with pytest.raises(ValidationError) as e:
        parse_distribution("poisson(lam=3)")
    assert e.value.key == "lam"
    with pytest.raises(ValidationError) as e:
        parse_distribution("binomial(n=2)")
    assert e.value.key == "p"
    with pytest.raises(ValidationError) as e:
        parse_rate("rate_catalog:capacity", {"K": 10})
    assert e.value.key == "M"


maps = st.one_of(
    st.just(Identity()),
    st.builds(MaxShift, st.integers(1, 5)),
    st.builds(ShiftGated, st.integers(0, 5)),
    st.builds(AffineFloor, st.fractions(F(1, 4), F(4), max_denominator=4), st.integers(0, 3)),
)


@given(maps)
def test_map_text_round_trip(m):
    assert parse_map(m.to_text()) == m


@given(st.fractions(F(0), F(1), max_denominator=1000))
def test_rate_text_round_trip(q):
    r = ConstantRate(q)
    assert parse_rate(r.to_text()) == r


# ------------------------------------------------------------------ config ---


def test_example_config():
    cfg = parse_config(EXAMPLE)
    assert cfg.command == "tvd"
    assert cfg.processes["b"]["offspring"] == "poisson(mu=3)"
    assert cfg.integer("N") == 1_000_000 and cfg.grid("k") == [1]
    assert cfg.options["side"] == "psdbp"
    assert cfg.process("a") == PSDBP(BevertonHoltBinomial(100))
    assert cfg.process("b") == capacity_pair(100).cbp
    # a K sweep overrides the section parameters
    assert cfg.process("b", K=25) == capacity_pair(25).cbp


def test_round_trip_and_header():
    cfg = parse_config(EXAMPLE)
    assert parse_config(format_config(cfg)) == cfg
    body = header(cfg) + "K,k,z0\n1,2,3\n"
    assert all(line.startswith("# ") for line in header(cfg).splitlines())
    assert config_from_header(body) == cfg


@pytest.mark.parametrize("name", sorted(FIGURES))
def test_figure_configs_parse(name):
    cfg = parse_config(FIGURES[name])
    assert parse_config(format_config(cfg)) == cfg


def test_figure_process_definitions():
    fig1 = parse_config(FIGURES["fig1"])
    assert fig1.process("bh") == PSDBP(BevertonHoltBinomial(100))
    assert (fig1.integer("z0"), fig1.integer("generations")) == (10, 1000)
    fig4 = parse_config(FIGURES["fig4"])
    pair = capacity_pair(37)
    assert fig4.process("psdbp", K=37) == pair.psdbp
    assert fig4.process("cbp", K=37) == pair.cbp
    assert fig4.grid("K") == list(range(1, 201)) and fig4.grid("k") == [1, 2, 5]


def test_with_options_validates():
    cfg = parse_config(EXAMPLE)
    assert cfg.with_options(seed=7, plot=True).options["plot"] == "true"
    assert cfg.with_options(seed=None) == cfg
    with pytest.raises((ValidationError, ParseError)):
        cfg.with_options(side="sideways")


def test_grids():
    assert parse_grid("10,25") == [10, 25]
    assert parse_grid("1..5,3,9") == [1, 2, 3, 4, 5, 9]
    assert parse_grid("") == []
    with pytest.raises(ValueError):
        parse_grid("5..1")


def test_tabulated_family():
    cfg = parse_config(
        "[process.t] kind=psdbp family=tabulated at.1=poisson(mu=2) at.2=bernoulli(p=1/2) default=poisson(mu=1)\n"
    )
    p = cfg.process("t")
    assert p.offspring.law(1) == Poisson(2) and p.offspring.law(9) == Poisson(1)


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("[process.x] kind=cbp control=binomial psi=identity q=1.5 offspring=poisson(mu=1)", "q", 1),
        ("[process.x]\nkind=psdbp family=binomial_bh", "K", None),
        ("[process.x] kind=psdbp family=binomial_bh K=10 colour=blue", "colour", 1),
        ("[process.x] kind=psdbp family=binomial_bh K=10\n[run] N=0", "N", 2),
        ("[process.x] kind=psdbp family=binomial_bh K=10\n[run] side=left", "side", 2),
        ("[process.x] kind=psdbp family=binomial_bh K=ten", "K", 1),
        ("[process.x] kind=psdbp family=binomial_bh K=10\n[run] seed=1 seed=2", "seed", 2),
    ],
)
def test_validation_errors_name_the_key(text, key, line):
    with pytest.raises(ValidationError) as e:
        parse_config(text)
    assert e.value.key == key
    if line is not None:
        assert e.value.line == line


@pytest.mark.parametrize(
    "text",
    [
        "[proc.x] kind=psdbp",
        "kind=psdbp",
        "[process.x] kind psdbp",
        "[process.x] kind=cbp control=poisson psi=identity offspring=poisson(mu=",
    ],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_config(text)


def test_config_needs_a_process():
    with pytest.raises(ValidationError):
        parse_config("[run] command=simulate")

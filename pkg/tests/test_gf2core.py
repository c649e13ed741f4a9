from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cancellative_lab.gf2core import (HALF, Z, Config, Lattice, grad, grad_inv, pairing,
                                      pairing_admissible, parity_norm, pointwise_product, ring,
                                      to_doubled, to_site)


def sites(*s, lat=Z):
    return Config.from_sites(s, lat)


finite_bits = st.lists(st.integers(0, 1), max_size=24)


@st.composite
def finite_configs(draw, parity=None):
    p = draw(st.integers(0, 1)) if parity is None else parity
    lat = Lattice(p)
    lo = draw(st.integers(-10, 10))
    return Config.from_bits(draw(finite_bits), lat.doubled(lo), lat)


@st.composite
def tailed_configs(draw, parity=None):
    p = draw(st.integers(0, 1)) if parity is None else parity
    lat = Lattice(p)
    lo = draw(st.integers(-10, 10))
    return Config.from_bits(draw(finite_bits), lat.doubled(lo), lat,
                            draw(st.integers(0, 1)), draw(st.integers(0, 1)))


def test_doubled_roundtrip():
    for s in (0, 3, -2, Fraction(1, 2), Fraction(-3, 2)):
        assert to_site(to_doubled(s)) == s
    assert to_doubled(Fraction(1, 2)) == 1
    with pytest.raises(ValueError):
        to_doubled(Fraction(1, 3))


def test_normalisation_makes_equality_semantic():
    a = Config.from_bits([0, 0, 1, 1, 0], -4, Z)
    b = sites(0, 1)
    assert a == b
    assert Config.from_bits([1, 1], 0, Z, left=0, right=1) == Config.heaviside(0, Z)


def test_classes():
    h = Config.heaviside(0, Z)
    assert h.in_s_minus() and not h.in_s_plus() and not h.is_finite
    r = Config.heaviside(0, Z, reverse=True)
    assert r.in_s_plus() and not r.in_s_minus()
    assert Config.ones(Z).value(1000) == 1


def test_literal_roundtrip():
    x = Config.from_literal({"lattice": "Z+1/2", "offset": "-1/2", "bits": "1101",
                             "left": 0, "right": 1})
    assert x.value(-1) == 1 and x.value(1) == 1 and x.value(3) == 0 and x.value(5) == 1
    assert x.value(101) == 1
    assert Config.from_literal(x.to_literal()) == x
    rlit = {"lattice": "ring", "n": 5, "parity": 1, "bits": "10010"}
    assert Config.from_literal(rlit).to_literal()["bits"] == "10010"


def test_parity_norm_examples():
    assert parity_norm(Config.zeros(Z)) == 0
    assert parity_norm(sites(0, 1, 3)) == 1
    assert parity_norm(sites(0)) == 1
    with pytest.raises(ValueError):
        parity_norm(Config.heaviside(0, Z))


def test_pointwise_product_examples():
    assert pointwise_product(sites(0, 1), sites(1, 2)) == sites(1)
    assert pointwise_product(Config.heaviside(0, Z), sites(-1)) == Config.zeros(Z)
    assert pointwise_product(Config.heaviside(3, Z), Config.zeros(Z)) == Config.zeros(Z)
    with pytest.raises(ValueError):
        pointwise_product(sites(0), Config.zeros(HALF))


def test_grad_examples():
    h = Fraction(1, 2)
    assert grad(sites(0)) == sites(-h, h, lat=HALF)
    assert grad(sites(0, 1)) == sites(-h, 3 * h, lat=HALF)
    R = ring(6)
    assert grad(Config.from_bits([1] * 6, lattice=R)) == Config.from_bits([0] * 6, lattice=ring(6, 1))
    assert grad(Config.heaviside(0, Z)) == sites(-h, lat=HALF)


def test_grad_inv_examples():
    h = Fraction(1, 2)
    assert grad_inv(sites(-h, h, lat=HALF), "-") == sites(0)
    assert grad_inv(sites(h, lat=HALF), "-") == Config.heaviside(1, Z)
    assert grad_inv(Config.zeros(HALF), "-") == Config.zeros(Z)
    assert grad_inv(Config.zeros(HALF), "+") == Config.zeros(Z)
    with pytest.raises(ValueError):
        grad_inv(Config.heaviside(0, HALF), "-")
    with pytest.raises(ValueError):
        grad_inv(Config.heaviside(0, HALF, reverse=True), "+")
    with pytest.raises(ValueError):
        grad_inv(Config.from_bits([1, 0, 0, 0], lattice=ring(4, 1)))


def test_pairing_examples():
    hp = Config.heaviside(0, Z)
    hm = Config.heaviside(0, Z, reverse=True)
    assert pairing_admissible(hp, hm)
    assert pairing(hp, hm) == 1
    assert not pairing_admissible(Config.ones(Z), Config.ones(Z))
    assert pairing_admissible(sites(3), Config.ones(Z))
    with pytest.raises(ValueError):
        pairing(Config.ones(Z), Config.ones(Z))


@given(finite_configs())
def test_grad_is_bijective_on_finite(x):
    g = grad(x)
    assert g.lattice == x.lattice.dual
    assert g.is_finite
    assert grad_inv(g, "-") == x
    assert grad_inv(g, "+") == x


@given(finite_configs())
def test_one_sided_inverses_differ_by_ones_on_odd(y):
    a, b = grad_inv(y, "-"), grad_inv(y, "+")
    if parity_norm(y) == 0:
        assert a == b
    else:
        assert a.xor(b) == Config.ones(y.lattice.dual)
    assert grad(a) == y and grad(b) == y


@given(tailed_configs())
def test_grad_of_tailed_config_is_finite(x):
    g = grad(x)
    assert g.is_finite
    if x.left == 0:
        assert grad_inv(g, "-") == x
    if x.right == 0:
        assert grad_inv(g, "+") == x


@given(finite_configs(parity=0), finite_configs(parity=1))
def test_grad_is_self_adjoint(x, y):
    assert parity_norm(pointwise_product(grad(x), y)) == parity_norm(pointwise_product(x, grad(y)))


@given(finite_configs(parity=0), finite_configs(parity=0))
def test_parity_norm_linear(x, y):
    assert parity_norm(x ^ y) == parity_norm(x) ^ parity_norm(y)


@settings(max_examples=50)
@given(st.integers(3, 12), st.integers(0, 1), st.data())
def test_ring_grad_has_even_parity(n, p, data):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    x = Config.from_bits(bits, lattice=ring(n, p))
    g = grad(x)
    assert g.lattice == ring(n, 1 - p)
    assert parity_norm(g) == 0
    assert grad(grad_inv(g)) == g

from fractions import Fraction
from itertools import product

import pytest

from cancellative_lab.gf2core import Z, Config
from cancellative_lab.models import (FlipRateModel, RateTable, diagram_closure, disagreement_table,
                                     dual_table, flip_rate, half_shift_table,
                                     has_nn_voter_component, interface_table, local_frequency,
                                     model_from_spec, rebellious_table, same_up_to_reflection,
                                     type_symmetric_from_interface, voter_table)
from cancellative_lab.opalgebra import LocalOp, anchor, apply, psi_inv, translate

h = Fraction(1, 2)


def window(bits, lo):
    return Config.from_bits(bits, 2 * lo, Z)


def induced_flip_rate(rt, x, i=0):
    """Rate at which site i alone flips, summed over all translates of all shapes."""
    total = 0
    target = Config.from_sites([i])
    for shape, r in rt.entries:
        rows = sorted({a // 2 for a, _ in shape.entries})
        for k in {i - row for row in rows}:
            if apply(translate(shape, k), x) == target:
                total += r
    return total


def test_local_frequency_examples():
    x = window([1, 1, 0, 1, 1], -2)
    assert local_frequency(x, 0, 1, 2) == 1
    y = window([1, 0, 0, 1, 0], -2)
    assert local_frequency(y, 0, 1, 2) == Fraction(1, 2)
    for bits in product((0, 1), repeat=5):
        z = window(bits, -2)
        assert local_frequency(z, 0, 0, 2) + local_frequency(z, 0, 1, 2) == 1


def test_flip_rate_examples():
    x = window([0, 0, 0, 1, 0], -2)
    assert flip_rate(FlipRateModel("np", 1), x, 0) == Fraction(1, 4)
    assert flip_rate(FlipRateModel("affine", 0), x, 0) == 1
    y = window([0, 1, 0, 0, 0], -2)
    assert flip_rate(FlipRateModel("rebellious", Fraction(1)), y, 0) == h
    with pytest.raises(ValueError):
        FlipRateModel("rebellious", 1.5)


def test_rebellious_table_examples():
    t1 = rebellious_table(1)
    assert len(t1) == 2 and t1.entries == voter_table().entries
    assert len(rebellious_table(0)) == 2
    t = rebellious_table(0.6)
    assert sorted(round(float(r), 12) for _, r in t.entries) == [0.2, 0.2, 0.3, 0.3]
    assert t.is_ts and t.R == 2 and t.parity == 0
    with pytest.raises(ValueError):
        rebellious_table(-0.1)


def test_rebellious_table_matches_flip_rates_exhaustively():
    for k in range(11):
        alpha = Fraction(k, 10)
        rt = rebellious_table(alpha)
        model = FlipRateModel("rebellious", alpha)
        for bits in product((0, 1), repeat=5):
            x = window(bits, -2)
            assert induced_flip_rate(rt, x) == flip_rate(model, x, 0)


def test_rate_table_validation():
    A = LocalOp.from_sites([(0, -1), (0, 0)])
    with pytest.raises(ValueError):
        RateTable.build([(A, -1)])
    with pytest.raises(ValueError):
        RateTable.build([(A, 1), (translate(A, 3), 2)])
    with pytest.raises(ValueError):
        RateTable.build([(LocalOp.from_sites([(0, 0), (0, 3)]), 1)], R=2)
    t = RateTable.build([(translate(A, 5), 1), (LocalOp.from_sites([(0, 0), (0, 1)]), 0)])
    assert t.shapes == [A]


def test_dual_table_examples():
    d = dual_table(voter_table())
    assert LocalOp.from_sites([(0, 0), (1, 0)]) in d.shapes
    assert d.is_pp and not d.is_ts
    assert dual_table(d).entries == voter_table().entries
    empty = RateTable.build([])
    assert dual_table(empty).entries == ()


def test_interface_table_examples():
    y = interface_table(voter_table())
    assert y.parity == 1 and y.is_pp
    # one walker step to the right, one to the left
    assert set(y.shapes) == {anchor(LocalOp.from_sites([(-h, -h), (h, -h)])),
                             anchor(LocalOp.from_sites([(h, h), (-h, h)]))}
    assert len(interface_table(rebellious_table(0.4))) == 4
    rt = rebellious_table(0.4)
    assert type_symmetric_from_interface(interface_table(rt)).entries == rt.entries
    with pytest.raises(ValueError):
        interface_table(dual_table(voter_table()))


def test_diagram_closure_examples():
    for a in (0.3, 0.7, Fraction(3, 10)):
        d = diagram_closure(rebellious_table(a))
        assert same_up_to_reflection(d.X, d.Xp)
    dv = diagram_closure(voter_table())
    assert dv.Xp.entries == half_shift_table(voter_table()).entries
    assert has_nn_voter_component(dv.Xp)
    dd = diagram_closure(disagreement_table())
    excl = anchor(LocalOp.from_sites([(-h, -h), (-h, h), (h, -h), (h, h)]))
    assert dd.Y.shapes == [excl]


def test_has_nn_voter_component():
    assert has_nn_voter_component(rebellious_table(0.2))
    assert not has_nn_voter_component(rebellious_table(0))
    assert not has_nn_voter_component(diagram_closure(disagreement_table()).Y)


def test_generated_tables_respect_range():
    for a in (0, 0.25, 0.5, 1):
        d = diagram_closure(rebellious_table(a))
        for t in d:
            assert all(s.span <= t.R for s in t.shapes)


def test_model_from_spec():
    assert model_from_spec({"kind": "rebellious", "alpha": 0.6}).entries == \
        rebellious_table(0.6).entries
    assert isinstance(model_from_spec({"kind": "rebellious", "alpha": 0.6, "form": "flip"}),
                      FlipRateModel)
    t = model_from_spec({"kind": "table", "lattice": "Z", "R": 2,
                         "entries": [{"shape": [[0, -2], [0, 0]], "rate": 0.5}]})
    assert t.shapes == [LocalOp.from_literal([[0, -2], [0, 0]])] and t.R == 2
    with pytest.raises(ValueError):
        model_from_spec({"kind": "rebellious"})
    with pytest.raises(ValueError):
        model_from_spec({"kind": "nope"})
    assert anchor(psi_inv(interface_table(voter_table()).shapes[0])) in voter_table().shapes

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from expand_embed.constructor import BoxFamily, sard_schedule, schedule
from expand_embed.geometry.grid import Frame, ResolutionError
from expand_embed.geometry.properties import (
    BallUnion, assemble_property_family, check_k_conditions, check_properties, k_law,
)
from expand_embed.index_tree import CantorModel, Code, SardModel
from expand_embed.modulus import ModulusSpec

F = Fraction


@pytest.fixture(scope="module")
def cantor():
    model = CantorModel.geometric(4, 6)
    return model, BoxFamily.from_schedule(schedule(list(model.r), 2, 6))


@pytest.fixture(scope="module")
def sard():
    spec = ModulusSpec.power(1.5, 2)
    return SardModel(spec), BoxFamily.from_schedule(sard_schedule(spec, 7))


def test_cantor_p4_none(cantor):
    model, fam = cantor
    rep = check_properties(assemble_property_family(fam, model, F(1, 8), 2, 3, 16, 1))
    assert rep.p4_max_count == 0 and rep.p1_max_count == 0
    assert rep.p3_ok and rep.p6_ok and rep.p7_ok
    assert rep.decisions.grid == 0


def test_cantor_n_equals_m(cantor):
    model, fam = cantor
    pf = assemble_property_family(fam, model, F(1, 8), 2, 2, 1, 1)
    I = Code("01")
    assert pf.E(I, 0).r == pf.C(I).r
    outer, inner = pf.D(I, 0)
    assert outer.r[0] - inner.r[0] == F(1, 8) * F(1, 16)


def test_cantor_p2_exact(cantor):
    model, fam = cantor
    for n in (1, 2, 3):
        pf = assemble_property_family(fam, model, F(1, 8), n, n + 1, 4, 1)
        for I in (Code("0" * n), Code("1" * n)):
            assert pf.C(I).inscribed_radius() >= F(1, 8) * model.r_at(n)


def test_cantor_c_too_large(cantor):
    model, fam = cantor
    with pytest.raises(ValueError):
        assemble_property_family(fam, model, F(1, 5), 1, 2, 4, 1)


def test_resolution_error(sard):
    model, fam = sard
    with pytest.raises(ResolutionError):
        assemble_property_family(fam, model, 1 / 8, 2, 5, 8, 3, h=0.05)


def test_sard_small_family(sard):
    model, fam = sard
    pf = assemble_property_family(fam, model, 1 / 8, 1, 4, 8, 1)
    rep = check_properties(pf, thresholds={"p1_max_count": 0, "p4_max_count": 0, "p2_min_ratio": 0.1})
    assert all(rep.passed.values())
    assert rep.p3_ok and rep.p6_ok and rep.p7_ok
    assert 0 < rep.p5_normalized < 10


def test_k_conditions():
    r = check_k_conditions(k_law(2), 2, 1, 40)
    assert r.k1_sup == pytest.approx(1 / (1 - 2**-0.5), rel=1e-6)
    assert r.k1_certified
    # 2^{g/2} / 4^g = 2^{-3g/2} drops below 1/4 from g = 2 on
    r4 = check_k_conditions(k_law(4), 2, 1, 40)
    assert r4.k1_sup == pytest.approx(1 / (1 - 2**-1.5), rel=1e-6)
    assert r4.k2_threshold == 2
    assert check_k_conditions(k_law(2), 2, 1, 40).k2_threshold == 5


def test_k_conditions_dimension_one_refused():
    r = check_k_conditions(k_law(2), 1, 1, 20)
    assert not r.k1_certified
    sums = [r.k1_sums[n] for n in range(1, 21)]
    assert sums == [float(21 - n) for n in range(1, 21)]


def test_k_conditions_accepts_table():
    table = {(n, m): 4.0 ** (m - n) for n in range(1, 11) for m in range(n, 11)}
    assert check_k_conditions(table, 2, 1, 10).k2_threshold == 2


boxes = st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(0, 4), st.integers(0, 4), st.integers(1, 6))


def ball_union(items):
    lo = [(F(x), F(y)) for x, y, _, _, _ in items]
    hi = [(F(x + w), F(y + h)) for x, y, w, h, _ in items]
    return BallUnion(lo, hi, [F(r, 2) for *_, r in items])


@given(st.lists(boxes, min_size=1, max_size=4), st.lists(boxes, min_size=1, max_size=4))
def test_symbolic_relations_match_raster(a, b):
    A, B = ball_union(a), ball_union(b)
    frame = Frame.around((-4, -4), (16, 16), 0.125)
    ra, rb = A.raster(frame), B.raster(frame)
    if not A.intersects(B):
        assert (ra & rb).is_empty()
    if A.within(B):
        assert ra.issubset(rb)
    assert A.within(A.dilate(F(1, 3)))
    assert ra.issubset(A.simplify().raster(frame)) and A.simplify().raster(frame).issubset(ra)

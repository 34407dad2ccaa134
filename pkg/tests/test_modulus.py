import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from expand_embed import modulus as om
from expand_embed.modulus import ModulusSpec

P2 = ModulusSpec.power(2, 2)
P15 = ModulusSpec.power(1.5, 2)
PL21 = ModulusSpec.powerlog(2, 1, 2)


def test_eval_examples():
    assert om.eval(P2, 0.25) == pytest.approx(0.0625, abs=1e-15)
    for spec in (P2, P15, PL21):
        assert om.eval(spec, 0.0) == 0.0
    # r^2 ln(e/r) at 1/e is 2 e^-2
    assert om.eval(PL21, math.exp(-1)) == pytest.approx(2 * math.exp(-2), rel=1e-12)


def test_eval_domain():
    with pytest.raises(om.DomainError):
        om.eval(P2, -0.1)
    with pytest.raises(om.DomainError):
        om.eval(P2, 1.5)


def test_invert_examples():
    assert om.invert(P2, 1 / 16) == pytest.approx(0.25, rel=1e-11)
    assert om.invert(P15, 2.0**-5) == pytest.approx(2 ** (-10 / 3), rel=1e-11)
    assert om.invert(PL21, 2 * math.exp(-2)) == pytest.approx(math.exp(-1), rel=1e-10)


def test_invert_range_error():
    with pytest.raises(om.RangeError):
        om.invert(P2, 2.0)


def test_table_nonmonotone_rejected():
    bad = ModulusSpec.table([(0.1, 0.01), (0.2, 0.05), (0.3, 0.04), (1.0, 1.0)], 2)
    with pytest.raises(om.InvalidSpecError):
        om.invert(bad, 0.045)


def test_table_interpolates_power(tmp_path):
    rs = np.geomspace(1e-4, 1, 60)
    path = tmp_path / "w.csv"
    path.write_text("r,omega\n" + "".join(f"{float(r)!r},{float(r * r)!r}\n" for r in rs))
    spec = ModulusSpec.from_csv(path, dim=2)
    # log-linear interpolation is exact for a pure power
    assert om.eval(spec, 0.0123) == pytest.approx(0.0123**2, rel=1e-9)
    assert om.classify(spec).verdict == "Unknown"


def test_admissibility_power2():
    rep = om.check_admissibility(P2)
    assert rep.all_ok
    assert rep.doubling_constant == pytest.approx(4.0, rel=1e-9)


def test_admissibility_power3_ratio_fails():
    assert not om.check_admissibility(ModulusSpec.power(3, 2)).ratio_decreasing_ok


def test_admissibility_powerlog_on_convex_range():
    # omega'' = -1 - 2 ln r is negative above e^{-1/2}; the log factor is convex only below
    rep = om.check_admissibility(PL21, r_min=1e-6, r_max=math.exp(-0.5))
    assert rep.all_ok
    assert rep.doubling_constant <= 4 + 1e-9


def test_admissibility_powerlog_full_range_not_convex():
    assert not om.check_admissibility(PL21, r_min=1e-6, r_max=1.0).convex_ok


def test_admissibility_small_grid():
    with pytest.raises(ValueError):
        om.check_admissibility(P2, grid_size=4)


def test_critical_sequence_power2():
    seq = om.critical_sequence(P2, 3)
    assert seq.r == pytest.approx([0.5, 2**-1.5, 0.25], rel=1e-11)
    assert seq.r_star == pytest.approx([1.0, 2**-0.5, 0.5], rel=1e-11)


def test_critical_sequence_power15():
    assert om.critical_sequence(P15, 4).r[3] == pytest.approx(2 ** (-10 / 3), rel=1e-11)


@pytest.mark.parametrize(
    "spec, verdict",
    [
        (P2, "Divergent"),
        (P15, "Convergent"),
        (PL21, "Divergent"),
        (ModulusSpec.powerlog(2, 3, 2), "Convergent"),
        (ModulusSpec.power(3, 3), "Divergent"),
    ],
)
def test_classify_verdicts(spec, verdict):
    assert om.classify(spec).verdict == verdict


def test_classify_terms():
    res = om.classify(P2)
    assert np.allclose(res.terms, 2**-0.5, rtol=1e-10)
    res = om.classify(P15)
    assert res.term_ratio_estimate == pytest.approx(2 ** (-1 / 6), rel=1e-9)
    assert math.isfinite(res.tail_bound)


def test_spec_roundtrip_dict():
    for spec in (P2, PL21, ModulusSpec.table([(0.1, 0.01), (1.0, 1.0)], 3)):
        assert ModulusSpec.from_dict(spec.to_dict()) == spec


@given(p=st.floats(1.05, 4.0), y=st.floats(1e-12, 0.99))
def test_invert_eval_roundtrip(p, y):
    spec = ModulusSpec.power(p, 2)
    r = om.invert(spec, y)
    assert om.eval(spec, r) == pytest.approx(y, rel=1e-9)


@given(p=st.floats(1.0, 2.0), a=st.floats(0.0, 2.0), y=st.floats(1e-10, 0.2))
def test_invert_many_matches_scalar(p, a, y):
    spec = ModulusSpec.powerlog(p, a, 2)
    assert om.invert_many(spec, [y])[0] == pytest.approx(om.invert(spec, y), rel=1e-9)


@given(p=st.floats(1.0, 2.0), d=st.integers(2, 3))
def test_power_admissible_when_p_at_most_d(p, d):
    rep = om.check_admissibility(ModulusSpec.power(p, d))
    assert rep.monotone_ok and rep.convex_ok and rep.ratio_decreasing_ok


@given(r=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=10))
def test_eval_monotone(r):
    r = sorted(r)
    vals = om.eval_many(P15, np.array(r))
    assert np.all(np.diff(vals) >= 0)

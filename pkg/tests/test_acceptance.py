"""Acceptance gate: one test (and one summary line) per criterion."""

import functools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from expand_embed import modulus as om
from expand_embed.constructor import BoxFamily, bounding_growth, build_sard_witness, sard_schedule, schedule
from expand_embed.geometry.grid import Frame, GridSet, check_key, check_peri, p0_estimate, p_estimate, random_box_union
from expand_embed.geometry.properties import assemble_property_family, check_k_conditions, check_properties, k_law
from expand_embed.index_tree import CantorModel, SardModel
from expand_embed.modulus import ModulusSpec
from expand_embed.verifier import verify_embedding, verify_modulus

P2 = ModulusSpec.power(2, 2)
P15 = ModulusSpec.power(1.5, 2)
FAMILIES = {
    "Power(2)": P2,
    "PowerLog(2,1)": ModulusSpec.powerlog(2, 1, 2),
    "Power(1.5)": P15,
    "PowerLog(2,3)": ModulusSpec.powerlog(2, 3, 2),
}


def criterion(label):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            t0 = time.perf_counter()
            try:
                detail = fn(*a, **kw)
            except AssertionError as exc:
                msg = str(exc).splitlines()[0] if str(exc) else "assertion failed"
                ACCEPTANCE_LINES.append(f"FAIL  {label}: {msg}")
                print(f"FAIL  {label}: {msg}")
                raise
            line = f"PASS  {label}: {detail} ({time.perf_counter() - t0:.2f}s)"
            ACCEPTANCE_LINES.append(line)
            print(line)

        return run

    return wrap


@criterion("1 classification table")
def test_c1_classification():
    t0 = time.perf_counter()
    cases = [
        (P2, "Divergent"),
        (FAMILIES["PowerLog(2,1)"], "Divergent"),
        (ModulusSpec.power(3, 3), "Divergent"),
        (P15, "Convergent"),
        (FAMILIES["PowerLog(2,3)"], "Convergent"),
    ]
    got = [om.classify(s).verdict for s, _ in cases]
    elapsed = time.perf_counter() - t0
    assert got == [v for _, v in cases], f"verdicts {got}"
    assert elapsed < 1.0, f"runtime {elapsed:.2f}s"
    return f"verdicts {got}"


@criterion("2 critical sequence law")
def test_c2_critical_sequence():
    seq = om.critical_sequence(P2, 30)
    err_r = max(abs(r - 2 ** (-(n + 1) / 2)) for n, r in enumerate(seq.r, start=1))
    err_s = max(abs(om.eval(P2, r) - 2.0 ** -(n - 1)) for n, r in enumerate(seq.r_star, start=1))
    assert err_r <= 1e-10, f"max |r[n] - 2^-(n+1)/2| = {err_r:.3g}"
    assert err_s <= 1e-10, f"max |omega(r*) - 2^-(n-1)| = {err_s:.3g}"
    return f"max errors {err_r:.2g}, {err_s:.2g}"


@criterion("3 embedding construction")
def test_c3_embedding():
    t0 = time.perf_counter()
    model = SardModel(P15)
    fam = BoxFamily.from_schedule(sard_schedule(P15, 10))
    st10 = verify_embedding(fam, model, 10, "structural")
    fam8 = BoxFamily.from_schedule(sard_schedule(P15, 8))
    ex8 = verify_embedding(fam8, model, 8, "exhaustive")
    st8 = verify_embedding(fam8, model, 8, "structural")
    elapsed = time.perf_counter() - t0
    assert st10.ok, f"{len(st10.violations)} structural violations at N=10"
    assert ex8.checked_pairs == 32640, f"checked {ex8.checked_pairs} pairs"
    assert ex8.ok and ex8.violation_set() == st8.violation_set(), "modes disagree at N=8"
    assert elapsed < 60, f"runtime {elapsed:.1f}s"
    return f"N=10 structural clean, N=8 exhaustive {ex8.checked_pairs} pairs clean and agrees"


@criterion("4 Sard witness")
def test_c4_sard_witness():
    w = build_sard_witness(sard_schedule(P15, 8))
    rep = verify_modulus(w, P15, "exhaustive")
    assert rep.ok, f"{len(rep.violations)} violations"
    assert rep.min_slack >= 0, f"min_slack {rep.min_slack}"
    assert sorted(w.values) == [Fraction(j, 256) for j in range(256)], "witness values are not j/256"
    return f"{rep.checked_pairs} pairs, min_slack {rep.min_slack:.3g}, values = j/256"


@criterion("5 divergence demonstration")
def test_c5_growth():
    ell = bounding_growth(P2, 2, 40)
    err = max(abs(float(ell[K]) - K * 2**-0.5) for K in range(41))
    assert err <= 1e-9, f"max |l0(K) - K/sqrt2| = {err:.3g}"
    # growth between K = 50 and K = 200 separates the two regimes
    trend = {}
    for name, spec in FAMILIES.items():
        g = bounding_growth(spec, 2, 200)
        ratio = float(g[200]) / float(g[50])
        trend[name] = round(ratio, 3)
        grows = ratio > 1.5
        assert grows == (om.classify(spec).verdict == "Divergent"), f"{name}: growth ratio {ratio:.3f}"
    return f"max error {err:.2g}; l0(200)/l0(50) = {trend}"


@criterion("6 mutation sensitivity")
def test_c6_mutation():
    model = CantorModel.geometric(4, 6)
    sched = schedule(list(model.r), 2, 6)
    assert verify_embedding(BoxFamily.from_schedule(sched), model, 6, "exhaustive").ok
    counts = {}
    for k in range(1, 5):
        bad = BoxFamily.from_schedule(sched.with_gap(k, sched.gap_for_bit(k) / 2))
        n_bad = len(verify_embedding(bad, model, 6, "exhaustive").violations)
        assert n_bad >= 1, f"halving v_{k} went unnoticed"
        restored = BoxFamily.from_schedule(sched.with_gap(k, sched.gap_for_bit(k)))
        assert verify_embedding(restored, model, 6, "exhaustive").ok, f"restoring v_{k} left violations"
        counts[f"v{k}"] = n_bad
    return f"violations after halving: {counts}; zero after restoring"


@criterion("7 perimeter engine")
def test_c7_perimeter():
    t0 = time.perf_counter()
    h = 0.005
    sq = GridSet.from_boxes(Frame.around((0, 0), (1, 1), h, margin=0.3), [((0, 0), (1, 1))])
    p0 = p0_estimate(sq, 0.05, 0.05)
    assert abs(p0 / 4.4712 - 1) <= 0.02, f"square p0 = {p0:.4f}"
    disk = GridSet.ball(Frame.around((-1, -1), (1, 1), h, margin=0.3), (0, 0), 1.0)
    pd = p_estimate(disk).p_hat
    assert abs(pd / (2 * math.pi) - 1) <= 0.05, f"disk p_hat = {pd:.4f}"

    rng = np.random.default_rng(20240601)
    frame = Frame.around((0, 0), (1, 1), h, margin=0.2)
    corpus = [random_box_union(rng, frame, int(rng.integers(1, 6)))[0] for _ in range(100)]
    r = 0.05
    worst_isop = math.inf
    for i, S in enumerate(corpus):
        est = p_estimate(S)
        worst_isop = min(worst_isop, est.p_hat / est.iso_lower)
        assert 0.9 * est.iso_lower <= est.p_hat, f"set {i}: isoperimetric bound fails"
        chk = check_peri(S, corpus[(i + 1) % 100], r, tol=0.1)
        assert chk.rr_ok and chk.subadd_ok and chk.diff_ok and chk.key_ok, f"set {i}: {chk.margins}"
        size = 1 + i % 8
        ok, margin = check_key([corpus[(i + j) % 100] for j in range(size)], r, tol=0.1)
        assert ok, f"set {i}: key inequality with {size} sets, margin {margin:.4g}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 300, f"runtime {elapsed:.0f}s"
    return f"p0 {p0:.4f}, disk p_hat {pd:.4f}, 100 unions ok (min p_hat/iso {worst_isop:.3f})"


@criterion("8a property suite, Cantor family")
def test_c8a_cantor_properties():
    model = CantorModel.geometric(4, 6)
    fam = BoxFamily.from_schedule(schedule(list(model.r), 2, 6))
    worst_p5 = 0.0
    for n in range(1, 5):
        for m in range(n, 7):
            rep = check_properties(assemble_property_family(fam, model, Fraction(1, 8), n, m, 4 ** (m - n), 1))
            tag = f"n={n} m={m}"
            assert rep.p3_ok, f"{tag}: P3"
            assert rep.p6_ok is not False and rep.p7_ok is not False, f"{tag}: P6/P7"
            assert rep.p4_max_count == 0, f"{tag}: P4 count {rep.p4_max_count}"
            assert rep.p1_max_count == 0, f"{tag}: P1 count {rep.p1_max_count}"
            assert rep.p2_min_ratio >= 1 / 8, f"{tag}: P2 ratio {rep.p2_min_ratio}"
            assert rep.decisions.grid == 0, f"{tag}: needed the grid"
            if rep.p5_normalized is not None:
                worst_p5 = max(worst_p5, rep.p5_normalized)
    assert worst_p5 <= 4, f"P5 constant {worst_p5}"
    return f"P1/P4 = 0, P3/P6/P7 exact, P5 constant {worst_p5}"


@criterion("8b (k1)/(k2) for k = 4^(m-n), d = 2, C = 1")
def test_c8b_k_conditions():
    rep = check_k_conditions(k_law(4), 2, 1, 40)
    assert rep.k1_certified and rep.k1_sup <= 3.4143, f"k1 sup {rep.k1_sup}"
    assert rep.k2_threshold == 4, f"k2 threshold {rep.k2_threshold}, criterion expects 4 (k1 sup {rep.k1_sup:.4f} ok)"
    return f"k1 sup {rep.k1_sup:.4f}, k2 threshold {rep.k2_threshold}"


@criterion("8c property suite, Sard family Power(1.5)")
def test_c8c_sard_properties():
    model = SardModel(P15)
    summary = []
    for n, m, q in [(1, 4, 1), (2, 5, 3), (3, 6, 3)]:
        fam = BoxFamily.from_schedule(sard_schedule(P15, m + 2))
        rep = check_properties(assemble_property_family(fam, model, 1 / 8, n, m, 2 ** (m - n), q))
        tag = f"n={n} m={m}"
        assert rep.p3_ok, f"{tag}: P3"
        assert rep.p6_ok is not False and rep.p7_ok is not False, f"{tag}: P6/P7"
        for name in ("p1_max_count", "p4_max_count", "p2_min_ratio", "p5_normalized"):
            assert math.isfinite(getattr(rep, name)), f"{tag}: {name} not finite"
        assert rep.p2_min_ratio > 0, f"{tag}: P2"
        summary.append((n, m, rep.p1_max_count, rep.p4_max_count, round(rep.p2_min_ratio, 3), rep.p5_normalized))
    k = check_k_conditions(k_law(2), 2, 1, 40)
    assert k.k1_certified and math.isfinite(k.k1_sup)
    return f"(n, m, P1, P4, P2, P5) = {summary}; k1 sup {k.k1_sup:.4f}"


@criterion("9 d = 1 refusal")
def test_c9_dimension_one():
    rep = check_k_conditions(k_law(2), 1, 1, 30)
    sums = [rep.k1_sums[n] for n in range(1, 31)]
    assert np.allclose(np.diff(sums[::-1]), 1.0), "sums are not linear in the range"
    assert not rep.k1_certified, "d = 1 was certified"
    return f"sums grow by 1 per step up to {max(sums):.0f}; not certified"

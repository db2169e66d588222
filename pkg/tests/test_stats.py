import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from diffguide import cosine_similarity, welch_t_test
from diffguide.errors import DegenerateVariance, DimensionMismatch, SampleTooSmall, ZeroVector
from diffguide.stats import student_t_sf2

from .oracles import t_density, welch_oracle


def test_cosine_fixtures():
    assert cosine_similarity([1, 0], [0, 1]) == 0
    assert cosine_similarity([1, 1], [2, 2]) == pytest.approx(1, abs=1e-15)
    assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(32 / math.sqrt(1078), abs=1e-12)
    assert 32 / math.sqrt(1078) == pytest.approx(0.974632, abs=1e-6)


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1, 2], [1, 2, 3])
    with pytest.raises(ZeroVector):
        cosine_similarity([0, 0], [1, 2])


vec = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=8)


@settings(max_examples=300)
@given(vec, st.data(), st.floats(1e-3, 1e3))
def test_cosine_properties(a, data, c):
    b = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=len(a),
                           max_size=len(a)))
    if not any(a) or not any(b):
        return
    s = cosine_similarity(a, b)
    assert abs(s) <= 1 + 1e-12
    assert s == cosine_similarity(b, a)
    scaled = [c * x for x in a]
    # subnormal components can round to zero when scaled
    assume(any(scaled))
    assert cosine_similarity(a, scaled) == pytest.approx(1, abs=1e-12)


def test_welch_fixture():
    r = welch_t_test([1, 2, 3], [4, 5, 6], 0.05)
    assert r.t == pytest.approx(-3.67423, abs=1e-5)
    assert r.t == pytest.approx(-3 / math.sqrt(2 / 3), rel=1e-12)
    assert r.dof == pytest.approx(4, rel=1e-12)
    assert r.reject
    t, dof, p, reject = r
    assert p == pytest.approx(0.0213, abs=1e-4)


def test_welch_identical_and_errors():
    r = welch_t_test([1, 2, 3], [1, 2, 3])
    assert r.t == 0 and r.p == pytest.approx(1) and not r.reject
    with pytest.raises(SampleTooSmall):
        welch_t_test([1], [1, 2])
    with pytest.raises(DegenerateVariance):
        welch_t_test([2, 2], [2, 2, 2])
    r = welch_t_test([2, 2], [3, 3])
    assert r.t == -math.inf and r.p == 0 and r.reject


def test_welch_matches_independent_oracle():
    rng = random.Random(99)
    for _ in range(100):
        a = [rng.gauss(0, rng.uniform(0.5, 2)) for _ in range(rng.randint(2, 12))]
        b = [rng.gauss(rng.uniform(-2, 2), rng.uniform(0.5, 2)) for _ in range(rng.randint(2, 12))]
        r = welch_t_test(a, b)
        t, dof, p = welch_oracle(a, b)
        assert r.t == pytest.approx(t, rel=1e-9, abs=1e-12)
        assert r.dof == pytest.approx(dof, rel=1e-9)
        assert r.p == pytest.approx(p, abs=1e-9)


def test_welch_agrees_with_scipy():
    rng = np.random.default_rng(0)
    a, b = rng.normal(0, 1, 15), rng.normal(0.7, 2, 9)
    ref = sps.ttest_ind(a, b, equal_var=False)
    r = welch_t_test(a, b)
    assert r.t == pytest.approx(ref.statistic, rel=1e-12)
    assert r.p == pytest.approx(ref.pvalue, rel=1e-10)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=10),
       st.lists(st.floats(-100, 100), min_size=2, max_size=10))
def test_welch_antisymmetric(a, b):
    try:
        r1 = welch_t_test(a, b)
    except DegenerateVariance:
        return
    r2 = welch_t_test(b, a)
    assert r1.t == -r2.t
    assert r1.p == r2.p


def test_tail_probability_against_density_quadrature():
    from scipy import integrate
    for dof in (1, 2.5, 4, 30):
        for t in (0.1, 1.0, 3.0, 8.0):
            tail, _ = integrate.quad(t_density, t, math.inf, args=(dof,), epsabs=1e-14)
            assert student_t_sf2(t, dof) == pytest.approx(2 * tail, abs=1e-10)

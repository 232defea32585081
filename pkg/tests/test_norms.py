import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from u1higgs.gauge_core import GaugeField, psi
from u1higgs.lattice_geom import Segment, build_lattice, segments
from u1higgs.norms import (
    OneForm,
    ResourceError,
    eval_segment,
    eval_segment_naive,
    log_oneform,
    norm_full,
    norm_gr,
    norm_gr_argmax,
    seminorm_rho,
    seminorm_rho_argmax,
)


def random_form(N, rng, scale=1.0):
    geom = build_lattice(N)
    n = geom.n
    return OneForm(geom, scale * rng.normal(size=(n, n + 1)),
                   scale * rng.normal(size=(n + 1, n)))


# ---------------------------------------------------------------- log_oneform

def test_log_oneform_identity_and_range():
    geom = build_lattice(2)
    A = log_oneform(GaugeField.identity(geom))
    assert np.all(A.h == 0.0) and np.all(A.v == 0.0)
    g = GaugeField.random(geom, np.random.default_rng(0))
    A = log_oneform(g)
    assert np.all(A.h >= -np.pi) and np.all(A.h < np.pi)
    # round trip e^{iA} = g exactly at bond level
    np.testing.assert_allclose(np.exp(1j * A.h), np.exp(1j * g.theta_h), atol=1e-15)


# ---------------------------------------------------------------- eval_segment

def test_eval_single_bond():
    rng = np.random.default_rng(1)
    A = random_form(2, rng)
    s = Segment((1, 2), 1, 1, 2)
    assert eval_segment(A, s) == pytest.approx(A.h[1, 2], abs=1e-15)
    s = Segment((3, 0), 2, 1, 2)
    assert eval_segment(A, s) == pytest.approx(A.v[3, 0], abs=1e-15)


def test_eval_zero_length():
    A = random_form(2, np.random.default_rng(2))
    assert eval_segment(A, Segment((2, 2), 1, 0, 2)) == 0.0


def test_eval_concatenation_additive():
    A = random_form(3, np.random.default_rng(3))
    s_full = Segment((1, 4), 1, 5, 3)
    s_a = Segment((1, 4), 1, 2, 3)
    s_b = Segment((3, 4), 1, 3, 3)
    assert eval_segment(A, s_full) == pytest.approx(
        eval_segment(A, s_a) + eval_segment(A, s_b), abs=1e-12)


def test_eval_matches_naive_oracle():
    rng = np.random.default_rng(4)
    geom = build_lattice(3)
    segs = [s for s in segments(geom)]
    for _ in range(400):
        A = random_form(3, rng)
        s = segs[rng.integers(0, len(segs))]
        assert eval_segment(A, s) == pytest.approx(eval_segment_naive(A, s),
                                                   abs=1e-12)


# ---------------------------------------------------------------- norm_gr

def test_norm_gr_zero_form():
    A = OneForm.zero(build_lattice(2))
    assert norm_gr(A, 0.5) == 0.0


def test_norm_gr_constant_form_alpha_one():
    # A = c on every bond, alpha = 1: ratio ck/(k 2^-N) = c 2^N for all segments
    N, c = 3, 0.7
    geom = build_lattice(N)
    n = geom.n
    A = OneForm(geom, np.full((n, n + 1), c), np.full((n + 1, n), c))
    assert norm_gr(A, 1.0) == pytest.approx(c * 2 ** N, rel=1e-12)


def test_norm_gr_naive_oracle():
    rng = np.random.default_rng(5)
    geom = build_lattice(3)
    for _ in range(5):
        A = random_form(3, rng)
        alpha = rng.uniform(0, 1)
        naive = max(abs(eval_segment_naive(A, s)) / s.length ** alpha
                    for s in segments(geom) if s.nbonds > 0)
        assert norm_gr(A, alpha) == pytest.approx(naive, rel=1e-12)


def test_norm_gr_trivial_bound_log_field():
    # |log g|_{gr beta} <= pi 2^N for any gauge field (|A(l)| <= pi 2^N |l|)
    N, beta = 3, 0.5
    g = GaugeField.random(build_lattice(N), np.random.default_rng(6))
    A = log_oneform(g)
    assert norm_gr(A, beta) <= np.pi * 2 ** N * 1.0 + 1e-9


# ---------------------------------------------------------------- seminorm_rho

def test_seminorm_zero_form():
    A = OneForm.zero(build_lattice(2))
    assert seminorm_rho(A, 0.5) == 0.0


def _naive_seminorm(A, alpha):
    geom = A.geom
    best = 0.0
    segs = [s for s in segments(geom) if s.nbonds > 0]
    for i, s1 in enumerate(segs):
        for s2 in segs[i + 1:]:
            if s1.direction != s2.direction or s1.nbonds != s2.nbonds:
                continue
            axis = 0 if s1.direction == 1 else 1
            if s1.base[axis] != s2.base[axis] or s1.base == s2.base:
                continue
            off = 1 - axis
            d = abs(s1.base[off] - s2.base[off]) * 2.0 ** (-geom.N)
            rho = (s1.length * d) ** 0.5
            val = abs(eval_segment_naive(A, s1) - eval_segment_naive(A, s2)) / rho ** alpha
            best = max(best, val)
    return best


def test_seminorm_naive_oracle():
    rng = np.random.default_rng(7)
    for _ in range(3):
        A = random_form(2, rng)
        alpha = rng.uniform(0.1, 1.0)
        assert seminorm_rho(A, alpha) == pytest.approx(_naive_seminorm(A, alpha),
                                                       rel=1e-12)


def test_seminorm_gradient_form():
    # gradient forms A(x,y) = u(y) - u(x) depend only on endpoints
    rng = np.random.default_rng(8)
    geom = build_lattice(2)
    n = geom.n
    u = rng.normal(size=(n + 1, n + 1))
    A = OneForm(geom, u[1:, :] - u[:-1, :], u[:, 1:] - u[:, :-1])
    assert seminorm_rho(A, 0.5) == pytest.approx(_naive_seminorm(A, 0.5), rel=1e-12)


def test_seminorm_trivial_bound_log_field():
    # |log g|_{rho beta} <= 2 pi 2^{N(1+beta/2)}
    N, beta = 3, 0.5
    g = GaugeField.random(build_lattice(N), np.random.default_rng(9))
    assert seminorm_rho(log_oneform(g), beta) <= 2 * np.pi * 2 ** (N * (1 + beta / 2)) + 1e-9


def test_seminorm_budget_guard():
    A = OneForm.zero(build_lattice(8))
    with pytest.raises(ResourceError):
        seminorm_rho(A, 0.5)
    # sampled mode returns a lower bound without error
    v = seminorm_rho(A, 0.5, sampled=True, sample_quota=1000)
    assert v == 0.0


def test_sampled_mode_is_lower_bound():
    rng = np.random.default_rng(10)
    A = random_form(3, rng)
    exact = seminorm_rho(A, 0.5)
    sampled = seminorm_rho(A, 0.5, sampled=True, sample_quota=20000, seed=1)
    assert sampled <= exact + 1e-12


# ---------------------------------------------------------------- norm_full

def test_norm_full_zero():
    assert norm_full(OneForm.zero(build_lattice(2)), 0.3) == 0.0


def test_norm_full_is_sum_and_nonnegative():
    rng = np.random.default_rng(11)
    A = random_form(3, rng)
    gr = norm_gr(A, 0.5)
    sr = seminorm_rho(A, 0.5)
    assert norm_full(A, 0.5) == pytest.approx(gr + sr, rel=1e-15)
    assert norm_full(A, 0.5) >= gr >= 0.0


def test_norm_full_matches_naive_double_loop():
    rng = np.random.default_rng(12)
    A = random_form(3, rng)
    geom = A.geom
    naive_gr = max(abs(eval_segment_naive(A, s)) / s.length ** 0.5
                   for s in segments(geom) if s.nbonds > 0)
    assert norm_full(A, 0.5) == pytest.approx(naive_gr + _naive_seminorm(A, 0.5),
                                              rel=1e-11)


@given(st.integers(0, 6), st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_scaling_powers_of_two(k, alpha):
    rng = np.random.default_rng(13)
    A = random_form(2, rng)
    c = 2.0 ** (k - 3)
    assert norm_gr(A.scaled(c), alpha) == c * norm_gr(A, alpha)
    assert seminorm_rho(A.scaled(c), alpha) == c * seminorm_rho(A, alpha)


def test_scaling_general_constant():
    rng = np.random.default_rng(14)
    A = random_form(2, rng)
    c = 0.37
    assert norm_gr(A.scaled(c), 0.5) == pytest.approx(c * norm_gr(A, 0.5), rel=1e-12)


def test_triangle_inequality():
    rng = np.random.default_rng(15)
    for _ in range(10):
        A = random_form(2, rng)
        B = random_form(2, rng)
        assert norm_full(A + B, 0.5) <= norm_full(A, 0.5) + norm_full(B, 0.5) + 1e-10


def test_rho_pairs_respect_lower_bound():
    # every contributing pair has rho >= 2^(-N/2) |l|^(1/2)
    rng = np.random.default_rng(16)
    A = random_form(3, rng)
    _, arg = seminorm_rho_argmax(A, 0.5)
    N = 3
    length = arg["nbonds"] * 2.0 ** (-N)
    dist = abs(arg["line2"] - arg["line"]) * 2.0 ** (-N)
    assert (length * dist) ** 0.5 >= 2 ** (-N / 2) * length ** 0.5 - 1e-15


def test_argmax_recomputes():
    rng = np.random.default_rng(17)
    A = random_form(3, rng)
    val, arg = norm_gr_argmax(A, 0.5)
    s = Segment((arg["base"], arg["line"]) if arg["direction"] == 1
                else (arg["line"], arg["base"]), arg["direction"], arg["nbonds"], 3)
    assert abs(eval_segment(A, s)) / s.length ** 0.5 == pytest.approx(val, rel=1e-12)

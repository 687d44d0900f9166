import math

import numpy as np
import pytest

from fkneuro.dg import face_rule, gauss_legendre_01, reference_simplex_rule, simplex_rule


def exact_simplex_monomial(exponents):
    """Analytic integral of x^a y^b ... over the unit reference simplex:
    prod(a_i!) / (sum(a_i) + d)!"""
    d = len(exponents)
    num = 1
    for a in exponents:
        num *= math.factorial(a)
    return num / math.factorial(sum(exponents) + d)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_gauss_legendre_01_exactness(n):
    x, w = gauss_legendre_01(n)
    for p in range(2 * n):
        assert np.sum(w * x**p) == pytest.approx(1.0 / (p + 1), rel=1e-13)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("exactness", [1, 2, 4, 6])
def test_reference_simplex_exactness(d, exactness):
    pts, w = reference_simplex_rule(d, exactness)
    assert w.sum() == pytest.approx(1.0 / math.factorial(d), rel=1e-13)
    for total in range(exactness + 1):
        for exps in _exponents(d, total):
            val = np.sum(w * np.prod(pts ** np.array(exps), axis=1))
            assert val == pytest.approx(
                exact_simplex_monomial(exps), rel=1e-12, abs=1e-15
            ), f"d={d} exps={exps}"


def _exponents(d, total):
    if d == 1:
        return [(total,)]
    out = []
    for head in range(total + 1):
        for rest in _exponents(d - 1, total - head):
            out.append((head, *rest))
    return out


def test_mapped_simplex_measures():
    tri = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
    pts, w = simplex_rule(tri, 4)
    assert w.sum() == pytest.approx(3.0, rel=1e-13)
    # integrate x over the triangle: centroid_x * area = (2/3) * 3
    assert np.sum(w * pts[:, 0]) == pytest.approx(2.0, rel=1e-12)

    tet = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
    pts, w = simplex_rule(tet, 3)
    assert w.sum() == pytest.approx(1.0 / 3.0, rel=1e-13)
    assert np.sum(w * pts[:, 2]) == pytest.approx((1.0 / 3.0) * 0.5, rel=1e-12)


def test_face_rule_segment():
    seg = np.array([[1.0, 1.0], [4.0, 5.0]])  # length 5
    pts, w = face_rule(seg, 3)
    assert w.sum() == pytest.approx(5.0, rel=1e-13)
    # integrate the coordinate x along the segment: mean x * length
    assert np.sum(w * pts[:, 0]) == pytest.approx(2.5 * 5.0, rel=1e-12)


def test_face_rule_triangle_3d():
    tri = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    pts, w = face_rule(tri, 4)
    assert w.sum() == pytest.approx(0.5, rel=1e-13)
    assert np.sum(w * pts[:, 0]) == pytest.approx(0.5 / 3.0, rel=1e-12)
    assert np.all(pts[:, 2] == 1.0)

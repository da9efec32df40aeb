import json
from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shrinkerlab.errors import NotCertifiedError, PreconditionError
from shrinkerlab.gaussian import (
    entropy,
    f_functional,
    gram_matrix,
    localization_slack,
    tail_mass_check,
    volume_ratios,
    weighted_inner,
    weighted_norm_sq,
)
from shrinkerlab.geometry import CylinderSpec, circle, line, make_cylinder_samples, random_rotation, sphere_entropy

import oracles


@pytest.fixture(scope="module")
def fine_circle():
    return circle(resolution=1024)


@pytest.mark.parametrize("radius", [0.5, 1.0, sqrt(2), 3.0])
def test_f_of_circles_matches_quadrature(radius):
    c = circle(radius=radius, resolution=2048)
    assert f_functional(c) == pytest.approx(oracles.circle_gaussian_area(radius), rel=2e-6)


def test_f_of_line_is_one():
    assert f_functional(line((0.6, 0.8))) == pytest.approx(oracles.line_gaussian_area(), abs=1e-9)


def test_uncertified_line_refused():
    with pytest.raises(NotCertifiedError):
        f_functional(line(halfwidth=4, resolution=201))


def test_f_of_two_sphere():
    s2 = make_cylinder_samples(CylinderSpec(2, 2, 3), 64)
    assert f_functional(s2) == pytest.approx(oracles.sphere2_gaussian_area(2.0), rel=1e-3)


def test_entropy_of_circle(fine_circle):
    rep = entropy(fine_circle)
    assert rep.value == pytest.approx(oracles.circle_entropy(), abs=1e-4)
    assert rep.scale == pytest.approx(1.0, abs=1e-2)
    assert np.all(np.diff([v for _, v in rep.trace]) >= -1e-15)


def test_entropy_json_layout(fine_circle):
    data = json.loads(entropy(fine_circle, coarse=9, refine_iters=5).to_json())
    assert set(data) == {"lambda", "c", "x0", "trace"}


@settings(max_examples=8, deadline=None)
@given(c=st.floats(0.3, 3.0), v=st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_entropy_invariance(c, v):
    base = circle(resolution=256)
    moved = base.scaled(c).translated(np.array(v))
    assert entropy(moved).value == pytest.approx(entropy(base).value, abs=1e-4)


def test_entropy_dominates_f(fine_circle):
    wrong = fine_circle.scaled(1.7)
    assert entropy(wrong).value >= f_functional(wrong)


def test_cylinder_entropy():
    cyl = make_cylinder_samples(CylinderSpec(1, 2, 3, random_rotation(3, 1)), (64, 401))
    assert entropy(cyl, coarse=11, refine_iters=8).value == pytest.approx(sphere_entropy(1), abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_weighted_inner_bilinear_symmetric(a, b, seed):
    c = circle(resolution=64)
    rng = np.random.default_rng(seed)
    u, v, w = rng.normal(size=(3, c.num_nodes))
    assert weighted_inner(c, a * u + b * v, w) == pytest.approx(a * weighted_inner(c, u, w) + b * weighted_inner(c, v, w), abs=1e-10)
    assert weighted_inner(c, u, w) == pytest.approx(weighted_inner(c, w, u), abs=1e-14)


def test_gram_of_coordinates_on_circle(fine_circle):
    # int x1^2 = lambda * r^2 / 2 with r^2 = 2
    G = gram_matrix(fine_circle, [np.ones(fine_circle.num_nodes), fine_circle.nodes[:, 0], fine_circle.nodes[:, 1]])
    lam = f_functional(fine_circle)
    assert np.allclose(G, np.diag([lam, lam, lam]), atol=1e-10)


def test_constant_norm_is_f(fine_circle):
    assert weighted_norm_sq(fine_circle, np.ones(fine_circle.num_nodes)) == pytest.approx(f_functional(fine_circle))


def test_localization_slack_nonnegative_on_circle_modes(fine_circle):
    th = np.arctan2(fine_circle.nodes[:, 1], fine_circle.nodes[:, 0])
    for l in range(5):
        assert localization_slack(fine_circle, np.cos(l * th)) >= 0


def test_tail_mass_requires_normalization():
    cyl = make_cylinder_samples(CylinderSpec(1, 2, 3), (32, 401))
    with pytest.raises(PreconditionError):
        tail_mass_check(cyl, 2 * np.ones(cyl.num_nodes), 0.0, 4.0)
    with pytest.raises(PreconditionError):
        tail_mass_check(cyl, np.ones(cyl.num_nodes), 0.0, 1.5)


def test_values_length_checked(fine_circle):
    with pytest.raises(PreconditionError):
        weighted_inner(fine_circle, np.ones(3), np.ones(3))


def test_volume_ratio_on_line():
    # a line through the origin has vol(B_r) = 2r and entropy 1; the ball edge is resolved to one spacing
    ln = line()
    h = ln.edge_lengths.max()
    for r, q in volume_ratios(ln, [3.0, 5.0], 1.0):
        assert abs(1 / q - 2 * r) <= 2 * h
    with pytest.raises(PreconditionError):
        volume_ratios(line(), [1.0], 1.0)

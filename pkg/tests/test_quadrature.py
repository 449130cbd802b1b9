import numpy as np
import pytest

from helmscatter.exceptions import DomainError
from helmscatter.quadrature import regular_rule, duffy_self_rule, RuleSet, monomial_integral, \
	triangle_areas, near_singular_split, near_singular_split_batch, panel_distance, flat_triangle_potential

TRIANGLE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_monomial_integral():
	assert monomial_integral(0, 0) == pytest.approx(0.5)
	assert monomial_integral(1, 0) == pytest.approx(1.0 / 6.0)
	assert monomial_integral(1, 1) == pytest.approx(1.0 / 24.0)


@pytest.mark.parametrize('order, degree', [(1, 1), (3, 2), (6, 4), (12, 6)])
def test_regular_rule_exactness(order, degree):
	rule = regular_rule(order)
	assert len(rule) == order
	assert np.sum(rule.weights) == pytest.approx(0.5, abs = 1e-15)
	assert rule.degree == degree
	assert rule.exactness() >= degree


def test_regular_rule_unsupported():
	with pytest.raises(DomainError, match = '1, 3, 6, 12'):
		regular_rule(5)


def test_rule_map_weights():
	tri = np.array([[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 3.0, 0.0]]])
	points, weights = regular_rule(6).map(tri)
	assert points.shape == (1, 6, 3)
	assert np.sum(weights) == pytest.approx(3.0)
	# x over the triangle: 2 * 3 * (2 / 6)
	assert np.sum(weights * points[..., 0]) == pytest.approx(2.0)


def test_duffy_rule():
	rule = duffy_self_rule(8)
	assert np.sum(rule.weights) == pytest.approx(0.5, abs = 1e-13)
	assert np.all(rule.points[:, 0] >= 0) and np.all(rule.points[:, 1] >= 0)
	assert np.all(rule.points.sum(axis = 1) <= 1.0 + 1e-14)
	with pytest.raises(DomainError):
		duffy_self_rule(3)


def test_duffy_integrates_inverse_distance():
	centroid = TRIANGLE.mean(axis = 0)
	exact = flat_triangle_potential(TRIANGLE, centroid)
	points, weights = duffy_self_rule(8).map(TRIANGLE)
	approx = np.sum(weights / np.linalg.norm(points - centroid, axis = -1))
	assert approx == pytest.approx(exact, rel = 1e-6)


def test_flat_triangle_potential_is_additive():
	point = np.array([0.2, 0.3, 0.0])
	exact = flat_triangle_potential(TRIANGLE, point)
	fan = 0.0
	for i in range(3):
		fan += flat_triangle_potential(np.array([point, TRIANGLE[i], TRIANGLE[(i + 1) % 3]]), point)
	assert exact > 0
	assert fan == pytest.approx(exact, rel = 1e-12)


def test_ruleset():
	rules = RuleSet()
	assert rules.key() == (6, 8, 2.0, 4)
	assert RuleSet.parse(rules.to_dict()).key() == rules.key()
	assert RuleSet.parse(None).key() == rules.key()
	with pytest.raises(DomainError):
		RuleSet(eta = 0.0)
	with pytest.raises(DomainError):
		RuleSet(regular_order = 1)


def test_panel_distance():
	dist, diam = panel_distance(TRIANGLE[None, ...], np.array([[0.0, 0.0, 2.0]]))
	assert dist[0] == pytest.approx(2.0)
	assert diam[0] == pytest.approx(np.sqrt(2.0))


def test_split_far_target_keeps_panel():
	sub = near_singular_split(TRIANGLE, np.array([0.0, 0.0, 10.0]))
	assert len(sub) == 1
	assert np.allclose(sub[0], TRIANGLE)


def test_split_near_target_refines_and_preserves_area():
	sub = near_singular_split(TRIANGLE, np.array([1.05, 0.0, 0.0]), eta = 2.0, max_depth = 4)
	assert len(sub) > 4
	assert len(sub) <= 4 ** 4
	assert np.sum(triangle_areas(np.array(sub))) == pytest.approx(0.5, rel = 1e-12)


def test_split_depth_zero():
	sub = near_singular_split(TRIANGLE, np.array([0.5, 0.5, 0.0]), max_depth = 0)
	assert len(sub) == 1


def test_split_batch_owners_sorted():
	tris = np.stack([TRIANGLE, TRIANGLE + 5.0])
	targets = np.array([[1.05, 0.0, 0.0], [100.0, 0.0, 0.0]])
	sub, owner = near_singular_split_batch(tris, targets)
	assert np.all(np.diff(owner) >= 0)
	assert np.count_nonzero(owner == 1) == 1
	assert np.sum(triangle_areas(sub[owner == 0])) == pytest.approx(0.5, rel = 1e-12)


def test_split_eta_guard():
	with pytest.raises(DomainError):
		near_singular_split(TRIANGLE, np.zeros(3), eta = -1.0)

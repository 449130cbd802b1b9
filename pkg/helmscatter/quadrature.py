#!/usr/bin/env python3
#
# Triangle quadrature on the reference triangle (0,0), (1,0), (0,1).
# Points are stored as (xi, eta); a panel with vertices a, b, c maps them to
# a + xi (b - a) + eta (c - a) with area element 2 |T|.
#

import logging

import numpy as np

from helmscatter.constants import REGULAR_ORDERS, DEFAULT_REGULAR_ORDER, \
	DEFAULT_DUFFY_ORDER, DEFAULT_ETA, MAX_SPLIT_DEPTH
from helmscatter.exceptions import DomainError

REFERENCE_AREA = 0.5
CENTROID = (1.0 / 3.0, 1.0 / 3.0)


class PanelRule:
	def __init__(self, points, weights, degree, name = ''):
		self.points = np.asarray(points, dtype = np.float64).reshape(-1, 2)
		self.weights = np.asarray(weights, dtype = np.float64).reshape(-1)
		self.degree = degree
		self.name = name

	def __len__(self):
		return len(self.weights)

	def barycentric(self):
		"""(n, 3) barycentric coordinates with respect to vertices a, b, c"""
		xi = self.points[:, 0]
		eta = self.points[:, 1]
		return np.stack([1.0 - xi - eta, xi, eta], axis = -1)

	def map(self, vertices):
		"""
		Maps the rule onto triangles.

		vertices: (..., 3, 3) array, triangle vertices on axis -2
		returns points (..., n, 3) and weights (..., n) carrying 2|T|
		"""
		vertices = np.asarray(vertices, dtype = np.float64)
		bary = self.barycentric()
		points = np.einsum('qa,...ad->...qd', bary, vertices)
		area = triangle_areas(vertices)
		weights = self.weights * (2.0 * area)[..., None]
		return points, weights

	def exactness(self, max_degree = None):
		"""Highest total degree integrated exactly on monomials x^p y^q"""
		if max_degree is None:
			max_degree = self.degree + 2
		xi = self.points[:, 0]
		eta = self.points[:, 1]
		reached = -1
		for d in range(max_degree + 1):
			for p in range(d + 1):
				q = d - p
				exact = monomial_integral(p, q)
				approx = np.sum(self.weights * xi ** p * eta ** q)
				if abs(approx - exact) > 1e-13 * max(1.0, abs(exact)):
					return reached
			reached = d
		return reached

	def __str__(self):
		t = '== PanelRule %s ==\n' % self.name
		t+= 'Points: %s\n' % len(self)
		t+= 'Degree: %s\n' % self.degree
		t+= 'WeightSum: %s\n' % np.sum(self.weights)
		return t


def monomial_integral(p, q):
	"""Integral of x^p y^q over the reference triangle: p! q! / (p + q + 2)!"""
	from math import factorial
	return factorial(p) * factorial(q) / factorial(p + q + 2)


def triangle_areas(vertices):
	vertices = np.asarray(vertices, dtype = np.float64)
	e1 = vertices[..., 1, :] - vertices[..., 0, :]
	e2 = vertices[..., 2, :] - vertices[..., 0, :]
	return 0.5 * np.linalg.norm(np.cross(e1, e2), axis = -1)


def _orbit3(a, w):
	b = 1.0 - 2.0 * a
	bary = [(a, a, b), (a, b, a), (b, a, a)]
	return bary, [w] * 3


def _orbit6(a, b, w):
	c = 1.0 - a - b
	bary = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
	return bary, [w] * 6


def _from_barycentric(bary, weights, degree, name):
	bary = np.asarray(bary, dtype = np.float64)
	points = bary[:, 1:3]
	weights = REFERENCE_AREA * np.asarray(weights, dtype = np.float64)
	return PanelRule(points, weights, degree, name)


# symmetric rules, weights normalised to a unit-area triangle
def _rule_table(order):
	if order == 1:
		return _from_barycentric([(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)], [1.0], 1, 'centroid')
	if order == 3:
		bary, w = _orbit3(1.0 / 6.0, 1.0 / 3.0)
		return _from_barycentric(bary, w, 2, 'strang-fix-3')
	if order == 6:
		b1, w1 = _orbit3(0.445948490915965, 0.223381589678011)
		b2, w2 = _orbit3(0.091576213509771, 0.109951743655322)
		return _from_barycentric(b1 + b2, w1 + w2, 4, 'dunavant-6')
	if order == 12:
		b1, w1 = _orbit3(0.249286745170910, 0.116786275726379)
		b2, w2 = _orbit3(0.063089014491502, 0.050844906370207)
		b3, w3 = _orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374)
		return _from_barycentric(b1 + b2 + b3, w1 + w2 + w3, 6, 'dunavant-12')
	return None


_RULE_CACHE = {}

def regular_rule(order):
	"""Symmetric Gauss rule on the reference triangle with `order` points"""
	if order not in REGULAR_ORDERS:
		raise DomainError('Unsupported triangle rule order %s, supported orders are %s' % (order, ', '.join(str(o) for o in REGULAR_ORDERS)))
	if order not in _RULE_CACHE:
		rule = _rule_table(order)
		# the tabulated weights carry 15 digits
		rule.weights *= REFERENCE_AREA / np.sum(rule.weights)
		_RULE_CACHE[order] = rule
	return _RULE_CACHE[order]


def duffy_self_rule(order, singular_point = CENTROID):
	"""
	Duffy rule for integrands with a 1/r singularity at `singular_point`.

	The reference triangle is fanned into three sub-triangles with the singular
	point as common apex; on each the map (u, v) -> s + u ((a - s) + v (b - a))
	cancels the singularity with its Jacobian u.
	"""
	if order < 4:
		raise DomainError('Duffy rule needs order >= 4, got %s' % order)
	gx, gw = np.polynomial.legendre.leggauss(order)
	gx = 0.5 * (gx + 1.0)
	gw = 0.5 * gw
	u, v = np.meshgrid(gx, gx, indexing = 'ij')
	wu, wv = np.meshgrid(gw, gw, indexing = 'ij')
	u = u.reshape(-1)
	v = v.reshape(-1)
	base_w = (wu * wv).reshape(-1) * u

	s = np.asarray(singular_point, dtype = np.float64)
	corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
	points = []
	weights = []
	for idx in range(3):
		a = corners[idx]
		b = corners[(idx + 1) % 3]
		det = abs((a[0] - s[0]) * (b[1] - a[1]) - (a[1] - s[1]) * (b[0] - a[0]))
		if det == 0.0:
			# singular point on this edge
			continue
		pts = s[None, :] + u[:, None] * ((a - s)[None, :] + v[:, None] * (b - a)[None, :])
		points.append(pts)
		weights.append(base_w * det)
	return PanelRule(np.concatenate(points), np.concatenate(weights), 2 * order - 1, 'duffy-%s' % order)


class RuleSet:
	"""Quadrature choices shared by assembly and evaluation"""
	def __init__(self, regular_order = DEFAULT_REGULAR_ORDER, duffy_order = DEFAULT_DUFFY_ORDER, eta = DEFAULT_ETA, max_depth = MAX_SPLIT_DEPTH):
		if eta <= 0:
			raise DomainError('Near-singular parameter eta must be positive, got %s' % eta)
		if regular_order == 1:
			# the centroid rule samples the collocation point itself
			raise DomainError('Assembly needs a regular rule of order 3, 6 or 12')
		self.regular = regular_rule(regular_order)
		self.duffy = duffy_self_rule(duffy_order)
		self.regular_order = regular_order
		self.duffy_order = duffy_order
		self.eta = float(eta)
		self.max_depth = int(max_depth)

	def key(self):
		return (self.regular_order, self.duffy_order, self.eta, self.max_depth)

	def to_dict(self):
		return {
			'regular_order' : self.regular_order,
			'duffy_order' : self.duffy_order,
			'eta' : self.eta,
			'max_depth' : self.max_depth,
		}

	@staticmethod
	def parse(d):
		if d is None:
			return RuleSet()
		return RuleSet(
			regular_order = int(d.get('regular_order', DEFAULT_REGULAR_ORDER)),
			duffy_order = int(d.get('duffy_order', DEFAULT_DUFFY_ORDER)),
			eta = float(d.get('eta', DEFAULT_ETA)),
			max_depth = int(d.get('max_depth', MAX_SPLIT_DEPTH)),
		)

	def __str__(self):
		t = '== RuleSet ==\n'
		for k, v in self.to_dict().items():
			t += '%s: %s\n' % (k, v)
		return t


def _probe_points(vertices):
	"""Vertices, edge midpoints and centroid: (..., 7, 3)"""
	a = vertices[..., 0, :]
	b = vertices[..., 1, :]
	c = vertices[..., 2, :]
	return np.stack([a, b, c, 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a), (a + b + c) / 3.0], axis = -2)


def _quadrisect(vertices):
	a = vertices[:, 0, :]
	b = vertices[:, 1, :]
	c = vertices[:, 2, :]
	ab = 0.5 * (a + b)
	bc = 0.5 * (b + c)
	ca = 0.5 * (c + a)
	children = np.stack([
		np.stack([a, ab, ca], axis = 1),
		np.stack([ab, b, bc], axis = 1),
		np.stack([ca, bc, c], axis = 1),
		np.stack([ab, bc, ca], axis = 1),
	], axis = 1)
	return children.reshape(-1, 3, 3)


def panel_distance(vertices, targets, mapping = None):
	"""
	Distance from targets to (mapped) triangles and their mapped diameters,
	both measured on the vertex/midpoint/centroid probes.
	"""
	probes = _probe_points(vertices)
	if mapping is not None:
		probes = mapping(probes)
	dist = np.min(np.linalg.norm(probes - targets[..., None, :], axis = -1), axis = -1)
	corners = probes[..., 0:3, :]
	diam = np.max(np.stack([
		np.linalg.norm(corners[..., 0, :] - corners[..., 1, :], axis = -1),
		np.linalg.norm(corners[..., 1, :] - corners[..., 2, :], axis = -1),
		np.linalg.norm(corners[..., 2, :] - corners[..., 0, :], axis = -1),
	], axis = -1), axis = -1)
	return dist, diam


def near_singular_split_batch(vertices, targets, eta = DEFAULT_ETA, max_depth = MAX_SPLIT_DEPTH, mapping = None):
	"""
	Recursive quadrisection of many (panel, target) pairs at once.

	vertices: (m, 3, 3) triangles, targets: (m, 3).
	mapping: optional callable taking (..., 3) parameter points to surface points;
	distances and diameters are measured after mapping.
	returns sub-triangles (M, 3, 3) in parameter space and their owner pair index (M,)
	"""
	if eta <= 0:
		raise DomainError('Near-singular parameter eta must be positive, got %s' % eta)
	vertices = np.asarray(vertices, dtype = np.float64).reshape(-1, 3, 3)
	targets = np.asarray(targets, dtype = np.float64).reshape(-1, 3)
	owner = np.arange(len(vertices))
	done_vertices = []
	done_owner = []
	depth = 0
	while len(vertices) > 0:
		dist, diam = panel_distance(vertices, targets[owner], mapping)
		finished = (dist >= eta * diam) | (depth >= max_depth)
		done_vertices.append(vertices[finished])
		done_owner.append(owner[finished])
		split = ~finished
		if not np.any(split):
			break
		vertices = _quadrisect(vertices[split])
		owner = np.repeat(owner[split], 4)
		depth += 1

	sub = np.concatenate(done_vertices) if done_vertices else np.zeros((0, 3, 3))
	own = np.concatenate(done_owner) if done_owner else np.zeros(0, dtype = np.int64)
	order = np.argsort(own, kind = 'stable')
	return sub[order], own[order]


def near_singular_split(panel, target, eta = DEFAULT_ETA, max_depth = MAX_SPLIT_DEPTH, mapping = None):
	"""
	Quadrisects `panel` until every sub-panel satisfies
	distance(target, sub-panel) >= eta * diameter(sub-panel) or max_depth is reached.
	"""
	sub, _ = near_singular_split_batch(np.asarray(panel)[None, ...], np.asarray(target)[None, ...], eta, max_depth, mapping)
	logging.debug('near_singular_split produced %d sub-panels' % len(sub))
	return [s for s in sub]


def flat_triangle_potential(vertices, point):
	"""
	Closed form of the integral of 1/|x - y| over a flat triangle for a point x
	in the plane of the triangle and not on its boundary.
	"""
	vertices = np.asarray(vertices, dtype = np.float64)
	x = np.asarray(point, dtype = np.float64)
	n = np.cross(vertices[1] - vertices[0], vertices[2] - vertices[0])
	n /= np.linalg.norm(n)
	total = 0.0
	for idx in range(3):
		a = vertices[idx]
		b = vertices[(idx + 1) % 3]
		e = b - a
		length = np.linalg.norm(e)
		t_hat = e / length
		# outward in-plane edge normal for a counter-clockwise triangle
		m_hat = np.cross(t_hat, n)
		h = np.dot(a - x, m_hat)
		if h == 0.0:
			continue
		ta = np.dot(a - x, t_hat)
		tb = np.dot(b - x, t_hat)
		total += h * (np.arcsinh(tb / abs(h)) - np.arcsinh(ta / abs(h)))
	return total

#!/usr/bin/env python3
#
# Reference sphere discretization, shape maps and deformed surfaces.
#
# Panels are flat icosphere triangles used as parameter domains: a flat point P
# is centrally projected to P/|P| on the unit sphere and then mapped by the
# shape. Integrals over a deformed panel therefore carry the gnomonic Jacobian
# (n_T . P) / |P|^3 and the tangential Jacobian of the shape.
#

import io
import json
import hashlib
import logging

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from helmscatter.constants import MAX_MESH_LEVEL, JACOBIAN_FLOOR, INJECTIVITY_FACTOR, ShapeFamily
from helmscatter.exceptions import DomainError, MeshLevelError, ShapeError


def _normalize(v):
	return v / np.linalg.norm(v, axis = -1, keepdims = True)


def _icosahedron():
	t = (1.0 + np.sqrt(5.0)) / 2.0
	nodes = np.array([
		[-1,  t,  0], [ 1,  t,  0], [-1, -t,  0], [ 1, -t,  0],
		[ 0, -1,  t], [ 0,  1,  t], [ 0, -1, -t], [ 0,  1, -t],
		[ t,  0, -1], [ t,  0,  1], [-t,  0, -1], [-t,  0,  1],
	], dtype = np.float64)
	panels = np.array([
		[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
		[1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
		[3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
		[4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
	], dtype = np.int64)
	return _normalize(nodes), panels


def _subdivide(nodes, panels):
	n_panels = len(panels)
	edges = np.concatenate([panels[:, [0, 1]], panels[:, [1, 2]], panels[:, [2, 0]]])
	keys = np.sort(edges, axis = 1)
	unique, inverse = np.unique(keys, axis = 0, return_inverse = True)
	inverse = inverse.reshape(-1)
	midpoints = _normalize(0.5 * (nodes[unique[:, 0]] + nodes[unique[:, 1]]))
	mid = len(nodes) + inverse
	ab = mid[0:n_panels]
	bc = mid[n_panels:2 * n_panels]
	ca = mid[2 * n_panels:3 * n_panels]
	a, b, c = panels[:, 0], panels[:, 1], panels[:, 2]
	children = np.stack([
		np.stack([a, ab, ca], axis = 1),
		np.stack([ab, b, bc], axis = 1),
		np.stack([ca, bc, c], axis = 1),
		np.stack([ab, bc, ca], axis = 1),
	], axis = 1).reshape(-1, 3)
	return np.concatenate([nodes, midpoints]), children


def _orient_outward(nodes, panels):
	tri = nodes[panels]
	n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
	inward = np.sum(n * tri.sum(axis = 1), axis = -1) < 0
	panels = panels.copy()
	panels[inward] = panels[inward][:, [0, 2, 1]]
	return panels


class ReferenceMesh:
	"""Icosphere triangulation of the unit sphere"""
	def __init__(self):
		self.level = None
		self.nodes = None
		self.panels = None
		self.panel_centroids = None
		self.panel_reference_areas = None
		self.flat_centroids = None
		self.flat_normals = None
		self.seed = None
		self.order = None

	@property
	def n_panels(self):
		return len(self.panels)

	def vertices(self, idx = None):
		"""Flat panel vertices, (N, 3, 3)"""
		if idx is None:
			return self.nodes[self.panels]
		return self.nodes[self.panels[idx]]

	def signature(self):
		return {'level' : self.level, 'seed' : self.seed}

	def edge_check(self):
		"""
		Returns True when every directed edge appears once and its reverse
		appears in exactly one other panel.
		"""
		directed = np.concatenate([self.panels[:, [0, 1]], self.panels[:, [1, 2]], self.panels[:, [2, 0]]])
		uniq, counts = np.unique(directed, axis = 0, return_counts = True)
		if np.any(counts != 1):
			return False
		forward = set(map(tuple, uniq.tolist()))
		return all((b, a) in forward for a, b in forward)

	def permuted(self, seed):
		"""Same mesh with panels listed in a random order"""
		rng = np.random.default_rng(seed)
		perm = rng.permutation(self.n_panels)
		mesh = ReferenceMesh()
		mesh.level = self.level
		mesh.nodes = self.nodes
		mesh.panels = self.panels[perm]
		mesh.panel_centroids = self.panel_centroids[perm]
		mesh.panel_reference_areas = self.panel_reference_areas[perm]
		mesh.flat_centroids = self.flat_centroids[perm]
		mesh.flat_normals = self.flat_normals[perm]
		mesh.seed = int(seed)
		mesh.order = perm if self.order is None else self.order[perm]
		logging.debug('Permuted level %d mesh with seed %d' % (self.level, seed))
		return mesh

	def __str__(self):
		t = '== ReferenceMesh ==\n'
		t+= 'Level: %s\n' % self.level
		t+= 'Nodes: %s\n' % len(self.nodes)
		t+= 'Panels: %s\n' % self.n_panels
		t+= 'FlatArea: %s\n' % np.sum(self.panel_reference_areas)
		if self.seed is not None:
			t+= 'PermutationSeed: %s\n' % self.seed
		return t


_MESH_CACHE = {}

def build_reference_mesh(level):
	if int(level) != level or level < 0:
		raise DomainError('Mesh level must be a nonnegative integer, got %r' % (level,))
	level = int(level)
	if level > MAX_MESH_LEVEL:
		raise MeshLevelError('Mesh level %d exceeds the limit %d' % (level, MAX_MESH_LEVEL))
	if level in _MESH_CACHE:
		return _MESH_CACHE[level]

	nodes, panels = _icosahedron()
	for _ in range(level):
		nodes, panels = _subdivide(nodes, panels)
	panels = _orient_outward(nodes, panels)

	tri = nodes[panels]
	cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
	mesh = ReferenceMesh()
	mesh.level = level
	mesh.nodes = nodes
	mesh.panels = panels
	mesh.flat_centroids = tri.mean(axis = 1)
	mesh.panel_centroids = _normalize(mesh.flat_centroids)
	mesh.panel_reference_areas = 0.5 * np.linalg.norm(cross, axis = -1)
	mesh.flat_normals = _normalize(cross)
	for arr in (mesh.nodes, mesh.panels, mesh.flat_centroids, mesh.panel_centroids, mesh.panel_reference_areas, mesh.flat_normals):
		arr.setflags(write = False)
	logging.debug('Built reference mesh level %d: %d nodes, %d panels' % (level, len(nodes), len(panels)))
	_MESH_CACHE[level] = mesh
	return mesh


def tangent_frame(s):
	"""Orthonormal tangent vectors e1, e2 at unit points s with e1 x e2 = s"""
	s = np.asarray(s, dtype = np.float64)
	a = np.zeros_like(s)
	polar = np.abs(s[..., 2]) > 0.9
	a[..., 2] = np.where(polar, 0.0, 1.0)
	a[..., 0] = np.where(polar, 1.0, 0.0)
	e1 = _normalize(a - np.sum(a * s, axis = -1, keepdims = True) * s)
	e2 = np.cross(s, e1)
	return e1, e2


class Bump:
	"""Radial bump amplitude * exp((s . center - 1) / width^2)"""
	def __init__(self, center, width, amplitude):
		center = np.asarray(center, dtype = np.float64).reshape(3)
		norm = np.linalg.norm(center)
		if norm == 0.0 or not np.isfinite(norm):
			raise ShapeError('Bump center must be a nonzero direction')
		if not width > 0:
			raise ShapeError('Bump width must be positive, got %s' % width)
		self.center = center / norm
		self.width = float(width)
		self.amplitude = float(amplitude)

	def value(self, s):
		return self.amplitude * np.exp((s @ self.center - 1.0) / self.width ** 2)

	def to_dict(self):
		return {'center' : self.center.tolist(), 'width' : self.width, 'amplitude' : self.amplitude}


class ShapeMap:
	"""
	Diffeomorphism of the unit sphere onto a deformed surface.

	Families: identity, uniform_scale(a), axes_scale(a, b, c),
	radial_star(bumps) with x -> rho(x) x and rho = 1 + sum of bumps,
	linear_family(base, direction, t) with x -> base(x) + t direction(x).
	"""
	def __init__(self, family, params = None, base = None, direction = None, t = None, bumps = None):
		self.family = family
		self.params = params
		self.base = base
		self.direction = direction
		self.t = t
		self.bumps = bumps

	@staticmethod
	def identity():
		return ShapeMap(ShapeFamily.IDENTITY)

	@staticmethod
	def uniform_scale(a):
		a = float(a)
		if not a > 0 or not np.isfinite(a):
			raise ShapeError('uniform_scale needs a positive factor, got %s' % a)
		return ShapeMap(ShapeFamily.UNIFORM_SCALE, params = (a,))

	@staticmethod
	def axes_scale(a, b, c):
		params = tuple(float(x) for x in (a, b, c))
		if not all(x > 0 and np.isfinite(x) for x in params):
			raise ShapeError('axes_scale needs positive factors, got %s' % (params,))
		return ShapeMap(ShapeFamily.AXES_SCALE, params = params)

	@staticmethod
	def radial_star(bumps, check = True):
		bumps = [b if isinstance(b, Bump) else Bump(*b) for b in bumps]
		if check:
			floor = 1.0 + sum(min(b.amplitude, 0.0) for b in bumps)
			if floor <= 0:
				raise ShapeError('radial_star profile can reach %s <= 0, the radius must stay positive' % floor)
		return ShapeMap(ShapeFamily.RADIAL_STAR, bumps = bumps)

	@staticmethod
	def linear_family(base, direction, t):
		return ShapeMap(ShapeFamily.LINEAR_FAMILY, base = base, direction = direction, t = float(t))

	def evaluate(self, s):
		"""Image of unit points s, (..., 3)"""
		s = np.asarray(s, dtype = np.float64)
		if self.family == ShapeFamily.IDENTITY:
			return s.copy()
		if self.family == ShapeFamily.UNIFORM_SCALE:
			return self.params[0] * s
		if self.family == ShapeFamily.AXES_SCALE:
			return s * np.asarray(self.params)
		if self.family == ShapeFamily.RADIAL_STAR:
			return self.radius(s)[..., None] * s
		if self.family == ShapeFamily.LINEAR_FAMILY:
			return self.base.evaluate(s) + self.t * self.direction.evaluate(s)
		raise ShapeError('Unknown shape family %s' % self.family)

	def radius(self, s):
		"""Radial profile of a radial_star map"""
		s = np.asarray(s, dtype = np.float64)
		rho = np.ones(s.shape[:-1])
		for bump in self.bumps:
			rho = rho + bump.value(s)
		return rho

	def jacobian(self, s):
		"""Differential of the homogeneous-degree-one extension, (..., 3, 3)"""
		s = np.asarray(s, dtype = np.float64)
		shape = s.shape[:-1] + (3, 3)
		if self.family == ShapeFamily.IDENTITY:
			return np.broadcast_to(np.eye(3), shape).copy()
		if self.family == ShapeFamily.UNIFORM_SCALE:
			return np.broadcast_to(self.params[0] * np.eye(3), shape).copy()
		if self.family == ShapeFamily.AXES_SCALE:
			return np.broadcast_to(np.diag(self.params), shape).copy()
		if self.family == ShapeFamily.RADIAL_STAR:
			rho = self.radius(s)
			grad = np.zeros(s.shape)
			for bump in self.bumps:
				grad = grad + (bump.value(s) / bump.width ** 2)[..., None] * bump.center
			# tangential part of the profile gradient
			grad = grad - np.sum(grad * s, axis = -1, keepdims = True) * s
			return rho[..., None, None] * np.eye(3) + s[..., :, None] * grad[..., None, :]
		if self.family == ShapeFamily.LINEAR_FAMILY:
			return self.base.jacobian(s) + self.t * self.direction.jacobian(s)
		raise ShapeError('Unknown shape family %s' % self.family)

	def pushforward(self, s):
		"""
		Returns images, unit normals and the tangential Jacobian magnitude at unit points s.
		"""
		s = np.asarray(s, dtype = np.float64)
		e1, e2 = tangent_frame(s)
		jac = self.jacobian(s)
		t1 = np.einsum('...ij,...j->...i', jac, e1)
		t2 = np.einsum('...ij,...j->...i', jac, e2)
		n = np.cross(t1, t2)
		sigma = np.linalg.norm(n, axis = -1)
		with np.errstate(invalid = 'ignore', divide = 'ignore'):
			normals = n / sigma[..., None]
		return self.evaluate(s), normals, sigma

	def contains(self, points):
		"""Analytic inside test, None when the family has none"""
		points = np.asarray(points, dtype = np.float64).reshape(-1, 3)
		if self.family == ShapeFamily.IDENTITY:
			return np.linalg.norm(points, axis = -1) < 1.0
		if self.family == ShapeFamily.UNIFORM_SCALE:
			return np.linalg.norm(points, axis = -1) < self.params[0]
		if self.family == ShapeFamily.AXES_SCALE:
			return np.sum((points / np.asarray(self.params)) ** 2, axis = -1) < 1.0
		if self.family == ShapeFamily.RADIAL_STAR:
			r = np.linalg.norm(points, axis = -1)
			out = r == 0.0
			nz = ~out
			out[nz] = r[nz] < self.radius(points[nz] / r[nz, None])
			return out
		return None

	def to_dict(self):
		d = {'family' : self.family.value}
		if self.params is not None:
			d['params'] = list(self.params)
		if self.bumps is not None:
			d['bumps'] = [b.to_dict() for b in self.bumps]
		if self.family == ShapeFamily.LINEAR_FAMILY:
			d['base'] = self.base.to_dict()
			d['direction'] = self.direction.to_dict()
			d['t'] = self.t
		return d

	@staticmethod
	def from_dict(d):
		try:
			family = ShapeFamily(d['family'])
		except (KeyError, ValueError) as e:
			raise ShapeError('Unknown shape family in %r' % (d,)) from e
		if family == ShapeFamily.IDENTITY:
			return ShapeMap.identity()
		if family == ShapeFamily.UNIFORM_SCALE:
			return ShapeMap.uniform_scale(*d['params'])
		if family == ShapeFamily.AXES_SCALE:
			return ShapeMap.axes_scale(*d['params'])
		if family == ShapeFamily.RADIAL_STAR:
			return ShapeMap.radial_star([(b['center'], b['width'], b['amplitude']) for b in d['bumps']])
		return ShapeMap.linear_family(ShapeMap.from_dict(d['base']), ShapeMap.from_dict(d['direction']), d['t'])

	def digest(self):
		return hashlib.sha256(json.dumps(self.to_dict(), sort_keys = True).encode()).hexdigest()

	def __str__(self):
		t = '== ShapeMap ==\n'
		t+= 'Family: %s\n' % self.family.value
		if self.params is not None:
			t+= 'Params: %s\n' % (self.params,)
		if self.bumps is not None:
			for b in self.bumps:
				t+= 'Bump: center=%s width=%s amplitude=%s\n' % (b.center.tolist(), b.width, b.amplitude)
		if self.family == ShapeFamily.LINEAR_FAMILY:
			t+= 't: %s\n' % self.t
		return t


class ShapeDiagnostics:
	def __init__(self):
		self.min_jacobian = None
		self.min_radius = None
		self.min_separation = None
		self.min_separation_ratio = None
		self.immersive = None
		self.injective = None

	@property
	def passed(self):
		return bool(self.immersive and self.injective)

	def to_dict(self):
		return {
			'min_jacobian' : self.min_jacobian,
			'min_radius' : self.min_radius,
			'min_separation' : self.min_separation,
			'min_separation_ratio' : self.min_separation_ratio,
			'immersive' : self.immersive,
			'injective' : self.injective,
			'passed' : self.passed,
		}

	def __str__(self):
		t = '== ShapeDiagnostics ==\n'
		for k, v in self.to_dict().items():
			t += '%s: %s\n' % (k, v)
		return t


def _panel_adjacency(mesh):
	n = mesh.n_panels
	rows = np.repeat(np.arange(n), 3)
	incidence = sparse.csr_matrix((np.ones(3 * n), (rows, mesh.panels.reshape(-1))), shape = (n, len(mesh.nodes)))
	return (incidence @ incidence.T).tocsr()


def validate_shape(phi, mesh):
	"""Immersion and injectivity diagnostics of phi sampled on the mesh"""
	diag = ShapeDiagnostics()
	samples = np.concatenate([mesh.panel_centroids, mesh.nodes])
	_, _, sigma = phi.pushforward(samples)
	diag.min_jacobian = float(np.min(sigma))
	radial = phi.family == ShapeFamily.RADIAL_STAR
	if radial:
		diag.min_radius = float(np.min(phi.radius(samples)))
	diag.immersive = bool(np.all(np.isfinite(sigma)) and diag.min_jacobian >= JACOBIAN_FLOOR and (not radial or diag.min_radius > 0))

	centroids = phi.evaluate(mesh.panel_centroids)
	images = phi.evaluate(mesh.nodes)[mesh.panels]
	diam = _diameters(images)
	adjacency = _panel_adjacency(mesh)
	k = min(mesh.n_panels, 24)
	dist, idx = cKDTree(centroids).query(centroids, k = k)
	best = np.full(mesh.n_panels, np.inf)
	for col in range(1, k):
		j = idx[:, col]
		adjacent = np.asarray(adjacency[np.arange(mesh.n_panels), j]).reshape(-1) > 0
		candidate = np.where(adjacent, np.inf, dist[:, col])
		best = np.minimum(best, candidate)
	ratio = best / diam
	diag.min_separation = float(np.min(best))
	diag.min_separation_ratio = float(np.min(ratio))
	diag.injective = bool(diag.min_separation_ratio > INJECTIVITY_FACTOR)
	logging.debug('Shape validation: min jacobian %s, separation ratio %s' % (diag.min_jacobian, diag.min_separation_ratio))
	return diag


def _diameters(tri):
	return np.max(np.stack([
		np.linalg.norm(tri[:, 0] - tri[:, 1], axis = -1),
		np.linalg.norm(tri[:, 1] - tri[:, 2], axis = -1),
		np.linalg.norm(tri[:, 2] - tri[:, 0], axis = -1),
	], axis = -1), axis = -1)


class DeformedSurface:
	"""Collocation data of a shape applied to a reference mesh"""
	def __init__(self):
		self.mesh = None
		self.shape = None
		self.points = None
		self.normals = None
		self.weights = None
		self.jacobians = None
		self.node_images = None
		self.panel_diameters = None
		self.shape_hash = None
		self._plans = {}
		self._probes = None

	@property
	def level(self):
		return self.mesh.level

	@property
	def n_panels(self):
		return self.mesh.n_panels

	@property
	def max_diameter(self):
		return float(np.max(self.panel_diameters))

	def area(self):
		return float(np.sum(self.weights))

	def project(self, flat_points):
		"""Unit sphere points of flat parameter points"""
		return _normalize(flat_points)

	def map_points(self, flat_points):
		"""Surface points of flat parameter points"""
		return self.shape.evaluate(_normalize(np.asarray(flat_points, dtype = np.float64)))

	def map_reference(self, flat_points, flat_normals):
		"""
		Pulls flat parameter points back onto the deformed surface.

		flat_points: (..., 3), flat_normals: (..., 3) unit normal of the flat panel
		each point lies on. Returns surface points, unit normals, and the area
		element per unit flat area.
		"""
		p = np.asarray(flat_points, dtype = np.float64)
		norm = np.linalg.norm(p, axis = -1)
		s = p / norm[..., None]
		y, nu, sigma = self.shape.pushforward(s)
		gnomonic = np.sum(np.asarray(flat_normals) * p, axis = -1) / norm ** 3
		return y, nu, gnomonic * sigma

	def probes(self):
		"""Images of panel vertices, edge midpoints and centroids, (N, 7, 3)"""
		if self._probes is None:
			tri = self.mesh.vertices()
			flat = np.stack([
				tri[:, 0], tri[:, 1], tri[:, 2],
				0.5 * (tri[:, 0] + tri[:, 1]), 0.5 * (tri[:, 1] + tri[:, 2]), 0.5 * (tri[:, 2] + tri[:, 0]),
				tri.mean(axis = 1),
			], axis = 1)
			self._probes = self.map_points(flat)
		return self._probes

	def panel_distances(self, targets):
		"""Probe distance from each target to each panel, (M, N)"""
		targets = np.asarray(targets, dtype = np.float64).reshape(-1, 3)
		probes = self.probes()
		out = np.empty((len(targets), self.n_panels))
		block = max(1, 200000 // self.n_panels)
		for start in range(0, len(targets), block):
			x = targets[start:start + block]
			d = np.linalg.norm(probes[None, :, :, :] - x[:, None, None, :], axis = -1)
			out[start:start + block] = np.min(d, axis = -1)
		return out

	def near_pairs(self, targets, factor, exclude = None):
		"""
		(target, panel) index pairs closer than factor * panel diameter.
		exclude: optional panel index per target that is skipped.
		"""
		targets = np.asarray(targets, dtype = np.float64).reshape(-1, 3)
		rows = []
		cols = []
		block = max(1, 200000 // self.n_panels)
		for start in range(0, len(targets), block):
			d = self.panel_distances(targets[start:start + block])
			near = d < factor * self.panel_diameters[None, :]
			if exclude is not None:
				ex = np.asarray(exclude[start:start + block])
				near[np.arange(len(ex)), ex] = False
			r, c = np.nonzero(near)
			rows.append(r + start)
			cols.append(c)
		return np.concatenate(rows), np.concatenate(cols)

	def contains(self, points):
		"""Inside test: analytic where the family has one, ray parity otherwise"""
		points = np.asarray(points, dtype = np.float64).reshape(-1, 3)
		inside = self.shape.contains(points)
		if inside is not None:
			return inside
		return _ray_parity(self.node_images[self.mesh.panels], points)

	def to_obj(self):
		"""Deformed triangulation as ASCII polygon text with 1-based faces"""
		buff = io.StringIO()
		buff.write('# helmscatter surface %s level %s\n' % (self.shape.family.value, self.level))
		for v in self.node_images:
			buff.write('v %.17g %.17g %.17g\n' % tuple(v))
		for f in self.mesh.panels + 1:
			buff.write('f %d %d %d\n' % tuple(f))
		return buff.getvalue()

	def __str__(self):
		t = '== DeformedSurface ==\n'
		t+= 'Shape: %s\n' % self.shape.family.value
		t+= 'Level: %s\n' % self.level
		t+= 'Panels: %s\n' % self.n_panels
		t+= 'Area: %s\n' % self.area()
		t+= 'MaxDiameter: %s\n' % self.max_diameter
		t+= 'ShapeHash: %s\n' % self.shape_hash
		return t


def _ray_parity(triangles, points, direction = (0.5773502691896258, 0.5773502691896258, 0.5773502691896257)):
	"""Moller-Trumbore crossing count along a fixed skew ray"""
	d = np.asarray(direction, dtype = np.float64)
	v0 = triangles[:, 0]
	e1 = triangles[:, 1] - v0
	e2 = triangles[:, 2] - v0
	p = np.cross(d, e2)
	det = np.sum(e1 * p, axis = -1)
	ok = np.abs(det) > 1e-14
	inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
	inside = np.zeros(len(points), dtype = bool)
	for i, x in enumerate(points):
		tvec = x - v0
		u = np.sum(tvec * p, axis = -1) * inv
		q = np.cross(tvec, e1)
		v = (q @ d) * inv
		dist = np.sum(e2 * q, axis = -1) * inv
		hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (dist > 0)
		inside[i] = np.count_nonzero(hit) % 2 == 1
	return inside


def apply_shape(phi, mesh):
	y, nu, sigma = phi.pushforward(mesh.panel_centroids)
	bad = ~(sigma >= JACOBIAN_FLOOR)
	if np.any(bad):
		i = int(np.argmax(bad))
		raise ShapeError('Shape is not an immersion: tangential Jacobian %s < %s at panel %d' % (sigma[i], JACOBIAN_FLOOR, i))

	c = mesh.flat_centroids
	norm = np.linalg.norm(c, axis = -1)
	gnomonic = np.sum(mesh.flat_normals * c, axis = -1) / norm ** 3

	surface = DeformedSurface()
	surface.mesh = mesh
	surface.shape = phi
	surface.points = y
	surface.normals = nu
	surface.jacobians = sigma
	surface.weights = mesh.panel_reference_areas * gnomonic * sigma
	surface.node_images = phi.evaluate(mesh.nodes)
	surface.panel_diameters = _diameters(surface.node_images[mesh.panels])
	signature = {'shape' : phi.to_dict(), 'mesh' : mesh.signature()}
	surface.shape_hash = hashlib.sha256(json.dumps(signature, sort_keys = True).encode()).hexdigest()
	for arr in (surface.points, surface.normals, surface.weights, surface.jacobians, surface.node_images, surface.panel_diameters):
		arr.setflags(write = False)
	logging.debug('Applied %s to level %d mesh: area %s' % (phi.family.value, mesh.level, surface.area()))
	return surface


def build_surface(phi, level, seed = None, check = True):
	"""Reference mesh, optional panel permutation, validation and apply_shape in one call"""
	mesh = build_reference_mesh(level)
	if seed is not None:
		mesh = mesh.permuted(seed)
	if check:
		diag = validate_shape(phi, mesh)
		if not diag.passed:
			raise ShapeError('Shape failed validation: %s' % json.dumps(diag.to_dict(), sort_keys = True))
	return apply_shape(phi, mesh)


def export_obj(surface, path):
	with open(path, 'w', newline = '\n') as f:
		f.write(surface.to_obj())

#!/usr/bin/env python3
#
# Post-processing of a density theta: the exterior field
# u = w[theta] + (1 - i Re k) v[theta], its gradient, Neumann traces and the
# far field by the direct kernels and by the sphere integral.
#

import io
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from helmscatter.constants import NeumannMethod, FarFieldRoute, FOUR_PI
from helmscatter.exceptions import DomainError
from helmscatter.geometry import build_reference_mesh
from helmscatter.kernels import as_wavenumber, fund_sol, grad_fund_sol, double_layer_kernel, \
	double_layer_gradient_kernel, split_laplace, farfield_kernels, radiation_residual
from helmscatter.operators import BoundaryField, BLOCK_BUDGET, bound_plan, assemble_lambda, \
	assemble_Wstar, solve_density, direct_flux_solve
from helmscatter.quadrature import RuleSet, near_singular_split_batch

# offsets h, h/2, h/4 and the weights cancelling the O(eps) and O(eps^2) terms
OFFSET_FACTORS = (1.0, 0.5, 0.25)
RICHARDSON_WEIGHTS = (1.0 / 3.0, -2.0, 8.0 / 3.0)
CLEARANCE_FACTOR = 0.5


def _k_single(k, c, xi, ny, d):
	return fund_sol(k, xi)

def _k_double(k, c, xi, ny, d):
	return double_layer_kernel(k, xi, ny)

def _k_double_diff(k, c, xi, ny, d):
	_, (_, smooth) = split_laplace(k, xi, -ny)
	return smooth

def _k_single_grad(k, c, xi, ny, d):
	return np.sum(d * grad_fund_sol(k, xi), axis = -1)

def _k_double_grad(k, c, xi, ny, d):
	return double_layer_gradient_kernel(k, xi, ny, d)

def _k_double_grad_diff(k, c, xi, ny, d):
	return double_layer_gradient_kernel(k, xi, ny, d, subtract_static = True)

def _k_field(k, c, xi, ny, d):
	return double_layer_kernel(k, xi, ny) + c * fund_sol(k, xi)

def _k_field_grad(k, c, xi, ny, d):
	return double_layer_gradient_kernel(k, xi, ny, d) + c * np.sum(d * grad_fund_sol(k, xi), axis = -1)

KERNELS = {
	'single' : _k_single,
	'double' : _k_double,
	'double_diff' : _k_double_diff,
	'single_grad' : _k_single_grad,
	'double_grad' : _k_double_grad,
	'double_grad_diff' : _k_double_grad_diff,
	'field' : _k_field,
	'field_grad' : _k_field_grad,
}


def _block_integrals(kernel, k, surface, bp, rules, targets, directions, skip, rows):
	"""Panel integrals of `kernel` for the target rows, (B, N)"""
	kern = KERNELS[kernel]
	c = k.coupling
	x = targets[rows]
	d = None if directions is None else directions[rows]
	xi = x[:, None, None, :] - bp.reg_y[None, :, :, :]
	if skip is not None:
		xi[np.arange(len(rows)), skip[rows]] = 1.0
	dd = None if d is None else d[:, None, None, :]
	out = np.sum(kern(k, c, xi, bp.reg_nu[None, :, :, :], dd) * bp.reg_w[None, :, :], axis = -1)

	dist = surface.panel_distances(x)
	near = dist < rules.eta * surface.panel_diameters[None, :]
	if skip is not None:
		near[np.arange(len(rows)), skip[rows]] = False
		out[np.arange(len(rows)), skip[rows]] = 0.0
	r, j = np.nonzero(near)
	if len(r) > 0:
		tri = surface.mesh.vertices(j)
		sub, owner = near_singular_split_batch(tri, x[r], rules.eta, rules.max_depth, surface.map_points)
		flat, w = rules.regular.map(sub)
		q = flat.shape[1]
		fn = surface.mesh.flat_normals[j[owner]]
		y, nu, jac = surface.map_reference(flat, fn[:, None, :])
		xq = x[r[owner]][:, None, :]
		dq = None if d is None else d[r[owner]][:, None, :]
		values = (kern(k, c, xq - y, nu, dq) * w * jac).reshape(-1)
		own = np.repeat(owner, q)
		sums = np.bincount(own, weights = values.real, minlength = len(r)) + 1j * np.bincount(own, weights = values.imag, minlength = len(r))
		out[r, j] = sums
	return out


def _blocks(surface, targets, rules):
	n = surface.n_panels
	q = len(rules.regular)
	block = max(1, BLOCK_BUDGET // (n * q))
	return [np.arange(s, min(len(targets), s + block)) for s in range(0, len(targets), block)]


def potential_matrix(surface, k, targets, kernel, rules = None, directions = None, skip = None, threads = 1):
	"""
	Matrix of panel integrals of a layer kernel at arbitrary targets, (M, N).
	Panels within eta diameters of a target are integrated on split sub-panels.
	skip: optional panel index per target whose entry is left at zero.
	"""
	k = as_wavenumber(k)
	rules = rules or RuleSet()
	bp = bound_plan(surface, rules)
	targets = np.asarray(targets, dtype = np.float64).reshape(-1, 3)
	if directions is not None:
		directions = np.broadcast_to(np.asarray(directions, dtype = np.float64), targets.shape)
	if skip is not None:
		skip = np.asarray(skip)
	out = np.empty((len(targets), surface.n_panels), dtype = np.complex128)

	def fill(rows):
		out[rows] = _block_integrals(kernel, k, surface, bp, rules, targets, directions, skip, rows)

	blocks = _blocks(surface, targets, rules)
	if threads is not None and threads > 1:
		with ThreadPoolExecutor(max_workers = threads) as executor:
			list(executor.map(fill, blocks))
	else:
		for rows in blocks:
			fill(rows)
	return out


def potential_apply(surface, k, targets, kernel, density, rules = None, directions = None, skip = None, threads = 1):
	"""potential_matrix(...) @ density without storing the matrix"""
	k = as_wavenumber(k)
	rules = rules or RuleSet()
	bp = bound_plan(surface, rules)
	targets = np.asarray(targets, dtype = np.float64).reshape(-1, 3)
	if directions is not None:
		directions = np.broadcast_to(np.asarray(directions, dtype = np.float64), targets.shape)
	if skip is not None:
		skip = np.asarray(skip)
	density = np.asarray(density, dtype = np.complex128)
	out = np.empty(len(targets), dtype = np.complex128)

	def fill(rows):
		out[rows] = _block_integrals(kernel, k, surface, bp, rules, targets, directions, skip, rows) @ density

	blocks = _blocks(surface, targets, rules)
	if threads is not None and threads > 1:
		with ThreadPoolExecutor(max_workers = threads) as executor:
			list(executor.map(fill, blocks))
	else:
		for rows in blocks:
			fill(rows)
	return out


class EvaluationSet:
	"""Exterior points with their clearance from the surface"""
	def __init__(self, points, clearance):
		self.points = points
		self.clearance = clearance

	def __len__(self):
		return len(self.points)

	@staticmethod
	def build(surface, points, rules = None):
		if isinstance(points, EvaluationSet):
			return points
		points = np.asarray(points, dtype = np.float64).reshape(-1, 3)
		clearance = np.min(surface.panel_distances(points), axis = 1)
		limit = CLEARANCE_FACTOR * surface.max_diameter
		close = clearance < limit
		if np.any(close):
			i = int(np.argmax(close))
			raise DomainError('Point %s is on the obstacle or within %.4g of it (half the largest panel diameter)' % (points[i].tolist(), limit))
		# Gauss test: the static double layer of 1 is 1 inside and 0 outside
		solid = potential_apply(surface, 0.0, points, 'double', np.ones(surface.n_panels), rules)
		inside = solid.real > 0.5
		if np.any(inside):
			i = int(np.argmax(inside))
			raise DomainError('Point %s lies inside the obstacle' % (points[i].tolist(),))
		return EvaluationSet(points, clearance)


def eval_solution(surface, k, theta, points, rules = None, threads = 1):
	"""u(x) = w[theta](x) + (1 - i Re k) v[theta](x) at exterior points"""
	theta.check(surface.shape_hash, 'Density')
	es = EvaluationSet.build(surface, points, rules)
	return potential_apply(surface, k, es.points, 'field', theta.values, rules, threads = threads)


def eval_gradient(surface, k, theta, points, rules = None, threads = 1):
	theta.check(surface.shape_hash, 'Density')
	es = EvaluationSet.build(surface, points, rules)
	out = np.empty((len(es), 3), dtype = np.complex128)
	for axis in range(3):
		e = np.zeros(3)
		e[axis] = 1.0
		out[:, axis] = potential_apply(surface, k, es.points, 'field_grad', theta.values, rules, directions = e, threads = threads)
	return out


def total_field(surface, k, theta, points, direction, rules = None, threads = 1):
	"""Incident plane wave exp(ik x.d) plus the scattered field"""
	k = as_wavenumber(k)
	es = EvaluationSet.build(surface, points, rules)
	d = np.asarray(direction, dtype = np.float64)
	incident = np.exp(1j * complex(k) * (es.points @ d))
	return incident + eval_solution(surface, k, theta, es, rules, threads)


def _offsets(surface, sign):
	h = surface.panel_diameters
	return [surface.points + sign * (f * h)[:, None] * surface.normals for f in OFFSET_FACTORS]


def _extrapolate(stages):
	return sum(w * s for w, s in zip(RICHARDSON_WEIGHTS, stages))


def _diverging(stages):
	f0, f1, f2 = stages
	scale = 1e-12 * max(1.0, np.max(np.abs(f2)))
	return np.abs(f2 - f1) > np.abs(f1 - f0) + scale


def double_layer_normal_derivative_matrix(surface, k, rules = None, threads = 1):
	"""
	Matrix of the exterior normal derivative of the double layer at the
	collocation points, and the three offset stages it extrapolates.

	Stage m evaluates at x_i + eps_m nu_i with the density subtracted at x_i:
	sum_j G_ij (mu_j - mu_i) + mu_i nu . grad (w_k - w_0)[1], since the static
	double layer of a constant has zero gradient outside.
	"""
	k = as_wavenumber(k)
	rules = rules or RuleSet()
	bp = bound_plan(surface, rules)
	key = ('dn', k)
	if key in bp.operators:
		return bp.operators[key]
	n = surface.n_panels
	idx = np.arange(n)
	ones = np.ones(n)
	stages = []
	for targets in _offsets(surface, 1.0):
		g = potential_matrix(surface, k, targets, 'double_grad', rules, surface.normals, skip = idx, threads = threads)
		diag = -np.sum(g, axis = 1)
		if complex(k) != 0:
			diag = diag + potential_apply(surface, k, targets, 'double_grad_diff', ones, rules, surface.normals, threads = threads)
		g[idx, idx] = diag
		stages.append(g)
	matrix = _extrapolate(stages)
	logging.debug('Double layer normal derivative matrix assembled for k=%s, N=%d' % (k, n))
	bp.operators[key] = (matrix, stages)
	return matrix, stages


def normal_derivative_double_layer(surface, k, mu, rules = None, threads = 1):
	"""Exterior normal derivative of w[mu] at the collocation points; .flags marks diverging extrapolations"""
	mu.check(surface.shape_hash, 'Density')
	matrix, stages = double_layer_normal_derivative_matrix(surface, k, rules, threads)
	values = [s @ mu.values for s in stages]
	out = BoundaryField(matrix @ mu.values, surface.shape_hash)
	out.flags = _diverging(values)
	if np.any(out.flags):
		logging.debug('Offset extrapolation diverging at %d of %d points' % (np.count_nonzero(out.flags), len(out)))
	return out


def layer_traces(surface, k, mu, side = 'exterior', rules = None, threads = 1):
	"""
	Limits of v[mu] and w[mu] at the collocation points from one side,
	extrapolated from offsets along the normal.
	"""
	mu.check(surface.shape_hash, 'Density')
	k = as_wavenumber(k)
	if side not in ('exterior', 'interior'):
		raise DomainError('side must be exterior or interior, got %r' % (side,))
	sign = 1.0 if side == 'exterior' else -1.0
	static = 0.0 if side == 'exterior' else 1.0
	n = surface.n_panels
	idx = np.arange(n)
	ones = np.ones(n)
	singles = []
	doubles = []
	for targets in _offsets(surface, sign):
		singles.append(potential_apply(surface, k, targets, 'single', mu.values, rules, threads = threads))
		w_mu = potential_apply(surface, k, targets, 'double', mu.values, rules, skip = idx, threads = threads)
		w_one = potential_apply(surface, k, targets, 'double', ones, rules, skip = idx, threads = threads)
		diff = potential_apply(surface, k, targets, 'double_diff', ones, rules, threads = threads)
		doubles.append(w_mu - w_one * mu.values + mu.values * (diff + static))
	single = BoundaryField(_extrapolate(singles), surface.shape_hash)
	double = BoundaryField(_extrapolate(doubles), surface.shape_hash)
	single.flags = _diverging(singles)
	double.flags = _diverging(doubles)
	return single, double


def neumann_trace(surface, k, theta = None, g = None, method = NeumannMethod.DIRECT, rules = None, threads = 1, force = False):
	"""Boundary samples of the normal derivative of u"""
	k = as_wavenumber(k)
	method = NeumannMethod(method)
	if method == NeumannMethod.DIRECT:
		if g is None:
			raise DomainError('The direct Neumann route needs the Dirichlet datum g')
		return direct_flux_solve(surface, k, g, rules, threads, force = force)
	if theta is None:
		if g is None:
			raise DomainError('The combined-field Neumann route needs theta or g')
		theta, _ = solve_density(assemble_lambda(surface, k, rules, threads), g)
	theta.check(surface.shape_hash, 'Density')
	dn = normal_derivative_double_layer(surface, k, theta, rules, threads)
	Ws = assemble_Wstar(surface, k, rules, threads)
	values = dn.values + k.coupling * (0.5 * theta.values + Ws.matrix @ theta.values)
	out = BoundaryField(values, surface.shape_hash)
	out.flags = dn.flags
	return out


def dtn_apply(surface, k, g, method = NeumannMethod.DIRECT, rules = None, threads = 1, force = False):
	"""Dirichlet-to-Neumann pullback applied to g"""
	return neumann_trace(surface, k, g = g, method = method, rules = rules, threads = threads, force = force)


class FarFieldGrid:
	"""u_inf samples with u ~ exp(ik|x|)/|x| (u_inf + O(1/|x|))"""
	def __init__(self, directions, values, route = None, normalization = 'no_4pi'):
		self.directions = np.asarray(directions, dtype = np.float64).reshape(-1, 3)
		self.values = np.asarray(values, dtype = np.complex128).reshape(-1)
		self.route = route
		self.normalization = normalization
		self.metadata = {}
		self.coefficients = None
		if len(self.directions) != len(self.values):
			raise DomainError('FarFieldGrid has %d directions and %d values' % (len(self.directions), len(self.values)))
		if np.any(np.abs(np.linalg.norm(self.directions, axis = -1) - 1.0) > 1e-12):
			raise DomainError('Far field directions must be unit vectors')

	def __len__(self):
		return len(self.values)

	def relative_error(self, other):
		"""max |self - other| / max |other|"""
		other = other.values if isinstance(other, FarFieldGrid) else np.asarray(other)
		return float(np.max(np.abs(self.values - other)) / np.max(np.abs(other)))

	def to_csv(self):
		buff = io.StringIO()
		buff.write('dir_x,dir_y,dir_z,re,im\n')
		for d, v in zip(self.directions, self.values):
			buff.write('%.17g,%.17g,%.17g,%.17g,%.17g\n' % (d[0], d[1], d[2], v.real, v.imag))
		return buff.getvalue()

	def to_dict(self):
		return {
			'route' : None if self.route is None else self.route.value,
			'normalization' : self.normalization,
			'metadata' : self.metadata,
			'records' : [
				{'direction' : d.tolist(), 're' : float(v.real), 'im' : float(v.imag)}
				for d, v in zip(self.directions, self.values)
			],
		}

	def __str__(self):
		t = '== FarFieldGrid ==\n'
		t+= 'Route: %s\n' % (None if self.route is None else self.route.value)
		t+= 'Directions: %s\n' % len(self)
		t+= 'MaxAbs: %s\n' % np.max(np.abs(self.values))
		return t


def sphere_directions(n):
	"""n quasi-uniform unit vectors on a Fibonacci spiral"""
	if n < 1:
		raise DomainError('Need at least one direction')
	i = np.arange(n) + 0.5
	z = 1.0 - 2.0 * i / n
	phi = np.pi * (1.0 + np.sqrt(5.0)) * i
	r = np.sqrt(1.0 - z * z)
	d = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis = -1)
	return d / np.linalg.norm(d, axis = -1, keepdims = True)


def _as_directions(directions):
	d = np.asarray(directions, dtype = np.float64).reshape(-1, 3)
	return d / np.linalg.norm(d, axis = -1, keepdims = True)


def far_field_direct(surface, k, theta, directions, rules = None):
	k = as_wavenumber(k)
	theta.check(surface.shape_hash, 'Density')
	bp = bound_plan(surface, rules)
	d = _as_directions(directions)
	y = bp.reg_y.reshape(-1, 3)
	nu = bp.reg_nu.reshape(-1, 3)
	q = bp.reg_w.shape[1]
	weights = (bp.reg_w * theta.values[:, None]).reshape(-1)
	values = np.empty(len(d), dtype = np.complex128)
	block = max(1, BLOCK_BUDGET // len(y))
	for start in range(0, len(d), block):
		xhat = d[start:start + block, None, :]
		single, double = farfield_kernels(k, xhat, y[None, :, :], nu[None, :, :])
		values[start:start + block] = (double + k.coupling * single) @ weights
	logging.debug('Direct far field at %d directions from %d panels x %d points' % (len(d), surface.n_panels, q))
	grid = FarFieldGrid(d, values, FarFieldRoute.DIRECT)
	grid.metadata = {'k' : [k.real, k.imag], 'level' : surface.level}
	return grid


def far_field_sphere_formula(surface, k, theta, R, directions, rules = None, threads = 1, level = None):
	"""
	u_inf(xhat) = 1/(4 pi) int_{|y|=R} u d_nu exp(-ik xhat.y) - exp(-ik xhat.y) d_nu u
	"""
	k = as_wavenumber(k)
	theta.check(surface.shape_hash, 'Density')
	rules = rules or RuleSet()
	reach = float(np.max(np.linalg.norm(surface.probes(), axis = -1)))
	need = reach + surface.max_diameter
	if not R > need:
		raise DomainError('R=%s has to be taken large enough that the sphere contains the obstacle: need R > %.6g' % (R, need))
	grid_mesh = build_reference_mesh(max(3, surface.level) if level is None else level)
	flat, w = rules.regular.map(grid_mesh.vertices())
	norm = np.linalg.norm(flat, axis = -1)
	nu = (flat / norm[..., None]).reshape(-1, 3)
	gnomonic = np.sum(grid_mesh.flat_normals[:, None, :] * flat, axis = -1) / norm ** 3
	weights = (w * gnomonic).reshape(-1) * R * R
	y = R * nu

	u = potential_apply(surface, k, y, 'field', theta.values, rules, threads = threads)
	du = potential_apply(surface, k, y, 'field_grad', theta.values, rules, directions = nu, threads = threads)

	d = _as_directions(directions)
	kv = complex(k)
	values = np.empty(len(d), dtype = np.complex128)
	for i, xhat in enumerate(d):
		phase = np.exp(-1j * kv * (y @ xhat))
		integrand = u * (-1j * kv * (nu @ xhat)) * phase - phase * du
		values[i] = np.sum(integrand * weights) / FOUR_PI
	logging.debug('Sphere-formula far field: R=%s, %d grid points' % (R, len(y)))
	grid = FarFieldGrid(d, values, FarFieldRoute.SPHERE_FORMULA)
	grid.metadata = {'k' : [k.real, k.imag], 'level' : surface.level, 'R' : float(R), 'grid_level' : grid_mesh.level}
	return grid


def radiation_check(surface, k, theta, direction, radii, rules = None):
	"""|x| (du/dr - iku) and |x| |u| along one ray"""
	k = as_wavenumber(k)
	d = _as_directions(direction)[0]
	radii = np.asarray(radii, dtype = np.float64).reshape(-1)
	x = radii[:, None] * d
	u = eval_solution(surface, k, theta, x, rules)
	grad = eval_gradient(surface, k, theta, x, rules)
	residual = radiation_residual(u, grad, x, k)
	rows = []
	for r, res, val in zip(radii, residual, u):
		rows.append({'radius' : float(r), 'residual' : float(abs(res)), 'scaled_field' : float(r * abs(val))})
	return rows

#!/usr/bin/env python3
#
# Observables along one-parameter families in (shape, k, datum), finite
# difference derivatives, and Chebyshev coefficient decay diagnostics.
#

import io
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.fft import dct

from helmscatter.constants import FamilyKind, SampleGrid, ObservableKind
from helmscatter.exceptions import DomainError, ShapeError, SolverError, AssemblyError, HelmScatterException
from helmscatter.geometry import ShapeMap, build_reference_mesh, apply_shape, validate_shape
from helmscatter.kernels import WaveNumber, as_wavenumber
from helmscatter.operators import AssemblyPlan, assemble_lambda, solve_density, bound_plan, pin_plan
from helmscatter.fields import far_field_direct, eval_solution, dtn_apply
from helmscatter.oracle import DirichletDatum, realize_datum
from helmscatter.quadrature import RuleSet

# relative floor below which Chebyshev coefficients are treated as zero
COEFFICIENT_FLOOR = 1e-12
GEOMETRIC_RHO_MIN = 1.05


def chebyshev_points(n, t_min, t_max):
	"""First-kind Chebyshev points in increasing order"""
	j = np.arange(n)
	x = np.cos(np.pi * (j + 0.5) / n)[::-1]
	return 0.5 * (t_min + t_max) + 0.5 * (t_max - t_min) * x


class FamilySpec:
	"""
	One-parameter family t -> (shape, k, datum) at a fixed mesh level.

	shape:      linear_family(base_shape, shape_direction, t)
	wavenumber: k0 + t dk
	datum:      datum0 + t datum_direction
	"""
	def __init__(self):
		self.kind = None
		self.level = None
		self.base_shape = ShapeMap.identity()
		self.shape_direction = None
		self.k0 = WaveNumber(1.0)
		self.dk = 0.0
		self.datum = DirichletDatum.constant(1.0)
		self.datum_direction = None
		self.t_min = None
		self.t_max = None
		self.n = None
		self.grid = SampleGrid.UNIFORM

	@staticmethod
	def shape(base, direction, t_min, t_max, n, level, k = 1.0, datum = None, grid = SampleGrid.UNIFORM):
		fs = FamilySpec()
		fs.kind = FamilyKind.SHAPE
		fs.base_shape = base
		fs.shape_direction = direction
		fs.k0 = as_wavenumber(k)
		fs.datum = datum or DirichletDatum.constant(1.0)
		fs._range(t_min, t_max, n, level, grid)
		return fs

	@staticmethod
	def wavenumber(k0, dk, t_min, t_max, n, level, shape = None, datum = None, grid = SampleGrid.UNIFORM):
		fs = FamilySpec()
		fs.kind = FamilyKind.WAVENUMBER
		fs.k0 = as_wavenumber(k0)
		fs.dk = complex(dk)
		fs.base_shape = shape or ShapeMap.identity()
		fs.datum = datum or DirichletDatum.constant(1.0)
		fs._range(t_min, t_max, n, level, grid)
		for t in (fs.t_min, fs.t_max):
			if (complex(fs.k0) + t * fs.dk).imag < 0:
				raise DomainError('Wave number family leaves C+ (complex numbers with nonnegative imaginary part) at t=%s' % t)
		return fs

	@staticmethod
	def datum_family(datum, direction, t_min, t_max, n, level, k = 1.0, shape = None, grid = SampleGrid.UNIFORM):
		fs = FamilySpec()
		fs.kind = FamilyKind.DATUM
		fs.datum = datum
		fs.datum_direction = direction
		fs.k0 = as_wavenumber(k)
		fs.base_shape = shape or ShapeMap.identity()
		fs._range(t_min, t_max, n, level, grid)
		return fs

	def _range(self, t_min, t_max, n, level, grid):
		if not t_max >= t_min:
			raise DomainError('Family range [%s, %s] is empty' % (t_min, t_max))
		if n < 1:
			raise DomainError('Family needs at least one sample')
		self.t_min = float(t_min)
		self.t_max = float(t_max)
		self.n = int(n)
		self.level = int(level)
		self.grid = SampleGrid(grid)

	def samples(self):
		if self.n == 1:
			return np.array([self.t_min])
		if self.grid == SampleGrid.CHEBYSHEV:
			return chebyshev_points(self.n, self.t_min, self.t_max)
		return np.linspace(self.t_min, self.t_max, self.n)

	def shape_at(self, t):
		if self.kind == FamilyKind.SHAPE:
			return ShapeMap.linear_family(self.base_shape, self.shape_direction, t)
		return self.base_shape

	def k_at(self, t):
		if self.kind == FamilyKind.WAVENUMBER:
			return WaveNumber(complex(self.k0) + t * self.dk)
		return self.k0

	def to_dict(self):
		return {
			'kind' : self.kind.value,
			'level' : self.level,
			'base_shape' : self.base_shape.to_dict(),
			'shape_direction' : None if self.shape_direction is None else self.shape_direction.to_dict(),
			'k0' : [self.k0.real, self.k0.imag],
			'dk' : [self.dk.real, self.dk.imag],
			'datum' : self.datum.to_dict(),
			'datum_direction' : None if self.datum_direction is None else self.datum_direction.to_dict(),
			'range' : [self.t_min, self.t_max],
			'n' : self.n,
			'grid' : self.grid.value,
		}


class ObservableSpec:
	def __init__(self, kind, direction = None, point = None, index = None):
		self.kind = ObservableKind(kind)
		self.direction = None if direction is None else np.asarray(direction, dtype = np.float64)
		self.point = None if point is None else np.asarray(point, dtype = np.float64)
		self.index = index

	@staticmethod
	def farfield_at(direction):
		d = np.asarray(direction, dtype = np.float64)
		return ObservableSpec(ObservableKind.FARFIELD_AT, direction = d / np.linalg.norm(d))

	@staticmethod
	def field_at(point):
		return ObservableSpec(ObservableKind.FIELD_AT, point = point)

	@staticmethod
	def dtn_entry(index):
		return ObservableSpec(ObservableKind.DTN_ENTRY, index = int(index))

	@staticmethod
	def density_norm():
		return ObservableSpec(ObservableKind.DENSITY_NORM)

	def evaluate(self, surface, k, theta, g, rules, order = None):
		"""order: panel permutation of surface relative to the unpermuted mesh"""
		if self.kind == ObservableKind.FARFIELD_AT:
			return far_field_direct(surface, k, theta, self.direction[None, :], rules).values[0]
		if self.kind == ObservableKind.FIELD_AT:
			return eval_solution(surface, k, theta, self.point[None, :], rules)[0]
		if self.kind == ObservableKind.DTN_ENTRY:
			idx = self.index
			if order is not None:
				idx = int(np.nonzero(order == self.index)[0][0])
			return dtn_apply(surface, k, g, rules = rules).values[idx]
		return complex(np.sqrt(np.sum(surface.weights * np.abs(theta.values) ** 2)))

	def to_dict(self):
		d = {'kind' : self.kind.value}
		if self.direction is not None:
			d['direction'] = self.direction.tolist()
		if self.point is not None:
			d['point'] = self.point.tolist()
		if self.index is not None:
			d['index'] = self.index
		return d


class _Pipeline:
	"""Surface, plan and factorized solves for one (shape, k) with any datum"""
	def __init__(self, shape, k, mesh, rules, plan = None):
		self.k = as_wavenumber(k)
		self.rules = rules
		diag = validate_shape(shape, mesh)
		if not diag.passed:
			raise ShapeError('Shape failed validation: %s' % diag.to_dict())
		self.surface = apply_shape(shape, mesh)
		# every later operator and observable on this surface reuses the frozen plan
		if plan is None:
			self.plan = bound_plan(self.surface, rules)
		else:
			self.plan = pin_plan(self.surface, plan)
		self.op = assemble_lambda(self.surface, self.k, rules, plan = self.plan)

	def solve(self, g):
		theta, diag = solve_density(self.op, g)
		return theta

	def datum(self, spec, direction = None, t = 0.0):
		g = realize_datum(spec, self.surface, self.k)
		if direction is not None:
			g = g + t * realize_datum(direction, self.surface, self.k)
		return g

	def observe(self, obs, g, order = None):
		theta = self.solve(g)
		return complex(obs.evaluate(self.surface, self.k, theta, g, self.rules, order))


def _family_plan(family, mesh, rules):
	if family.kind != FamilyKind.SHAPE:
		return None
	return AssemblyPlan.build(apply_shape(family.shape_at(0.0), mesh), rules)


def _evaluate_at(family, obs, t, mesh, rules, plan, order = None):
	try:
		pipe = _Pipeline(family.shape_at(t), family.k_at(t), mesh, rules, plan)
		if family.kind == FamilyKind.DATUM:
			g = pipe.datum(family.datum, family.datum_direction, t)
		else:
			g = pipe.datum(family.datum)
		return pipe.observe(obs, g, order)
	except HelmScatterException as e:
		msg = 'family evaluation failed at t=%s: %s' % (t, e)
		if isinstance(e, SolverError):
			raise type(e)(msg, condition = e.condition) from e
		if isinstance(e, AssemblyError):
			raise type(e)(msg, row = e.row, col = e.col) from e
		raise type(e)(msg) from e


def family_evaluate(family, obs, rules = None, threads = 1, mesh = None):
	"""[(t, value)] in increasing t"""
	rules = rules or RuleSet()
	mesh = mesh or build_reference_mesh(family.level)
	plan = _family_plan(family, mesh, rules)
	ts = family.samples()
	order = None if mesh.seed is None else mesh.order

	def one(t):
		return _evaluate_at(family, obs, t, mesh, rules, plan, order)

	if threads is not None and threads > 1:
		with ThreadPoolExecutor(max_workers = threads) as executor:
			values = list(executor.map(one, ts))
	else:
		values = [one(t) for t in ts]
	logging.debug('Family %s evaluated at %d samples' % (family.kind.value, len(ts)))
	return list(zip([float(t) for t in ts], values))


def noise_floor(family, obs, t = None, seeds = (1, 2), rules = None):
	"""Spread of the observable at t under permuted panel orderings"""
	rules = rules or RuleSet()
	t = 0.5 * (family.t_min + family.t_max) if t is None else t
	base_mesh = build_reference_mesh(family.level)
	ref = _evaluate_at(family, obs, t, base_mesh, rules, _family_plan(family, base_mesh, rules))
	spread = 0.0
	for seed in seeds:
		mesh = base_mesh.permuted(seed)
		value = _evaluate_at(family, obs, t, mesh, rules, _family_plan(family, mesh, rules), mesh.order)
		spread = max(spread, abs(value - ref))
	logging.debug('Noise floor at t=%s: %.3e' % (t, spread))
	return spread


class DerivativeEstimate:
	def __init__(self):
		self.order = None
		self.spacing = None
		self.nodes = None
		self.t = None
		self.values = None
		self.gap = None

	def at(self, t):
		i = int(np.argmin(np.abs(self.t - t)))
		return self.values[i]

	def to_dict(self):
		return {
			'order' : self.order,
			'spacing' : self.spacing,
			'records' : [{'t' : float(t), 're' : float(v.real), 'im' : float(v.imag)} for t, v in zip(self.t, self.values)],
			'gap' : None if self.gap is None else float(self.gap),
		}


def _stencil(f, h, order):
	n = len(f)
	if order == 2:
		nodes = np.arange(1, n - 1)
		return nodes, (f[nodes + 1] - f[nodes - 1]) / (2.0 * h)
	nodes = np.arange(2, n - 2)
	return nodes, (-f[nodes + 2] + 8.0 * f[nodes + 1] - 8.0 * f[nodes - 1] + f[nodes - 2]) / (12.0 * h)


def central_difference(t, values, order = 4):
	"""
	Central difference derivative at interior nodes of a uniform grid.
	gap is the largest difference to the other stencil order on shared nodes.
	"""
	if order not in (2, 4):
		raise DomainError('Stencil order must be 2 or 4, got %s' % order)
	t = np.asarray(t, dtype = np.float64)
	f = np.asarray(values, dtype = np.complex128)
	width = order + 1
	if len(f) < width or len(t) != len(f):
		raise DomainError('Order %d stencil needs at least %d samples, got %d' % (order, width, len(f)))
	steps = np.diff(t)
	h = float(steps[0])
	if not h > 0 or np.max(np.abs(steps - h)) > 1e-9 * abs(h):
		raise DomainError('Central differences need a uniform increasing grid')
	nodes, deriv = _stencil(f, h, order)
	est = DerivativeEstimate()
	est.order = order
	est.spacing = h
	est.nodes = nodes
	est.t = t[nodes]
	est.values = deriv
	other = 2 if order == 4 else 4
	if len(f) >= other + 1:
		o_nodes, o_deriv = _stencil(f, h, other)
		common, ia, ib = np.intersect1d(nodes, o_nodes, return_indices = True)
		est.gap = float(np.max(np.abs(deriv[ia] - o_deriv[ib])))
	return est


class ChebyshevFit:
	def __init__(self):
		self.coefficients = None
		self.floor = None
		self.resolved = None
		self.rho = None
		self.flat = None
		self.geometric = None
		self.residual_geometric = None
		self.residual_algebraic = None

	def to_dict(self):
		return {
			'coefficients' : [[float(c.real), float(c.imag)] for c in self.coefficients],
			'floor' : self.floor,
			'resolved' : self.resolved,
			'rho' : self.rho,
			'flat' : self.flat,
			'geometric' : self.geometric,
			'residual_geometric' : self.residual_geometric,
			'residual_algebraic' : self.residual_algebraic,
		}

	def __str__(self):
		t = '== ChebyshevFit ==\n'
		for k, v in self.to_dict().items():
			if k != 'coefficients':
				t += '%s: %s\n' % (k, v)
		return t


def _rms_fit(x, y):
	A = np.stack([np.ones_like(x), x], axis = -1)
	coef, _, _, _ = np.linalg.lstsq(A, y, rcond = None)
	res = y - A @ coef
	return coef, float(np.sqrt(np.mean(res * res)))


def chebyshev_coefficients(values):
	"""Coefficients of the interpolant through samples at increasing first-kind Chebyshev points"""
	f = np.asarray(values, dtype = np.complex128)[::-1]
	n = len(f)
	c = (dct(f.real, type = 2) + 1j * dct(f.imag, type = 2)) / n
	c[0] /= 2.0
	return c


def chebyshev_analyticity(values, noise = 0.0):
	"""
	Decay diagnostics of Chebyshev coefficients: rho from a log-linear fit over the
	last half of the resolved range, and a geometric versus algebraic comparison
	over the whole resolved range.
	"""
	if len(values) < 16:
		raise DomainError('Chebyshev analysis needs at least 16 samples, got %d' % len(values))
	c = chebyshev_coefficients(values)
	mag = np.abs(c)
	fit = ChebyshevFit()
	fit.coefficients = c
	fit.floor = float(max(COEFFICIENT_FLOOR * np.max(mag), noise))
	above = np.nonzero(mag[1:] > fit.floor)[0] + 1
	if len(above) < 3:
		fit.flat = True
		fit.geometric = False
		fit.resolved = int(above[-1]) if len(above) else 0
		return fit
	fit.flat = False
	last = int(above[-1])
	fit.resolved = last
	tail = above[above >= last // 2]
	if len(tail) < 3:
		tail = above
	coef, _ = _rms_fit(tail.astype(np.float64), np.log(mag[tail]))
	fit.rho = float(np.exp(-coef[1]))
	m = above.astype(np.float64)
	_, fit.residual_geometric = _rms_fit(m, np.log(mag[above]))
	_, fit.residual_algebraic = _rms_fit(np.log(m), np.log(mag[above]))
	fit.geometric = bool(fit.residual_geometric < fit.residual_algebraic and fit.rho > GEOMETRIC_RHO_MIN)
	return fit


class JointSweepSpec:
	"""Grid over (shape parameter t, Re k, datum amplitude a)"""
	def __init__(self):
		self.level = None
		self.base_shape = ShapeMap.identity()
		self.shape_direction = ShapeMap.identity()
		self.t_values = [0.0]
		self.k_values = [1.0]
		self.k_imag = 0.0
		self.datum = DirichletDatum.constant(1.0)
		self.datum_direction = DirichletDatum.constant(1.0)
		self.a_values = [0.0]

	def to_dict(self):
		return {
			'level' : self.level,
			'base_shape' : self.base_shape.to_dict(),
			'shape_direction' : self.shape_direction.to_dict(),
			't_values' : list(self.t_values),
			'k_values' : list(self.k_values),
			'k_imag' : self.k_imag,
			'datum' : self.datum.to_dict(),
			'datum_direction' : self.datum_direction.to_dict(),
			'a_values' : list(self.a_values),
		}


class SweepTable:
	def __init__(self):
		self.t_values = None
		self.k_values = None
		self.a_values = None
		self.values = None
		self.errors = []

	def to_csv(self):
		buff = io.StringIO()
		buff.write('t,k_re,a,re,im\n')
		for i, t in enumerate(self.t_values):
			for j, k in enumerate(self.k_values):
				for m, a in enumerate(self.a_values):
					v = self.values[i, j, m]
					buff.write('%.17g,%.17g,%.17g,%.17g,%.17g\n' % (t, k, a, v.real, v.imag))
		return buff.getvalue()

	def to_dict(self):
		return {
			'records' : [
				{'t' : float(t), 'k_re' : float(k), 'a' : float(a), 're' : float(self.values[i, j, m].real), 'im' : float(self.values[i, j, m].imag)}
				for i, t in enumerate(self.t_values)
				for j, k in enumerate(self.k_values)
				for m, a in enumerate(self.a_values)
			],
			'errors' : self.errors,
		}


def joint_sweep(spec, obs, rules = None, strict = False):
	"""Observable on the full grid; a failing (t, k) is recorded as NaN unless strict"""
	rules = rules or RuleSet()
	mesh = build_reference_mesh(spec.level)
	family = FamilySpec.shape(spec.base_shape, spec.shape_direction, 0.0, 0.0, 1, spec.level)
	plan = _family_plan(family, mesh, rules)
	table = SweepTable()
	table.t_values = list(spec.t_values)
	table.k_values = list(spec.k_values)
	table.a_values = list(spec.a_values)
	table.values = np.full((len(spec.t_values), len(spec.k_values), len(spec.a_values)), np.nan + 0j)
	for i, t in enumerate(spec.t_values):
		shape = ShapeMap.linear_family(spec.base_shape, spec.shape_direction, t)
		for j, kr in enumerate(spec.k_values):
			try:
				pipe = _Pipeline(shape, complex(kr, spec.k_imag), mesh, rules, plan)
				for m, a in enumerate(spec.a_values):
					g = pipe.datum(spec.datum, spec.datum_direction, a)
					table.values[i, j, m] = pipe.observe(obs, g)
			except HelmScatterException as e:
				if strict:
					raise
				logging.exception('Sweep point t=%s k=%s failed' % (t, kr))
				table.errors.append({'t' : float(t), 'k_re' : float(kr), 'error' : str(e)})
	return table


def mixed_differences(values):
	"""
	Mixed second differences over the first two axes computed in both orders;
	returns (delta_t delta_k, delta_k delta_t).
	"""
	f = np.asarray(values)
	dt_dk = np.diff(np.diff(f, axis = 1), axis = 0)
	dk_dt = np.diff(np.diff(f, axis = 0), axis = 1)
	return dt_dk, dk_dt

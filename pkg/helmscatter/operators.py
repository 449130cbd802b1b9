#!/usr/bin/env python3
#
# Collocation assembly of V, W, W* and the combined operator
# Lambda = -1/2 I + W + (1 - i Re k) V, and the dense solves built on them.
#

import io
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.linalg import lu_factor, lu_solve, get_lapack_funcs, LinAlgWarning

from helmscatter.constants import OperatorKind, NeumannMethod, RESIDUAL_TOLERANCE, CONDITION_LIMIT
from helmscatter.exceptions import AssemblyError, BindingError, SolverError, ResonanceError, DomainError
from helmscatter.header import OperatorHeader
from helmscatter.kernels import as_wavenumber, fund_sol, double_layer_kernel, adjoint_double_layer_kernel, split_laplace
from helmscatter.quadrature import RuleSet, near_singular_split_batch

# kernel evaluations per assembly block
BLOCK_BUDGET = 2000000


class BoundaryField:
	"""Complex samples at the collocation points of one surface"""
	def __init__(self, values, surface_hash):
		self.values = np.asarray(values, dtype = np.complex128).reshape(-1)
		self.surface_hash = surface_hash
		self.flags = None

	@staticmethod
	def on(surface, values):
		values = np.asarray(values, dtype = np.complex128)
		if values.ndim == 0:
			values = np.full(surface.n_panels, values, dtype = np.complex128)
		if len(values) != surface.n_panels:
			raise BindingError('Field has %d samples, surface has %d panels' % (len(values), surface.n_panels))
		return BoundaryField(values, surface.shape_hash)

	def check(self, surface_hash, what = 'field'):
		if self.surface_hash != surface_hash:
			raise BindingError('%s is bound to surface %s, not %s' % (what, self.surface_hash[:12], surface_hash[:12]))

	def __len__(self):
		return len(self.values)

	def _other(self, other):
		if isinstance(other, BoundaryField):
			other.check(self.surface_hash)
			return other.values
		return other

	def __add__(self, other):
		return BoundaryField(self.values + self._other(other), self.surface_hash)

	def __sub__(self, other):
		return BoundaryField(self.values - self._other(other), self.surface_hash)

	def __mul__(self, scalar):
		return BoundaryField(self.values * scalar, self.surface_hash)

	__rmul__ = __mul__

	def norm(self, ord = np.inf):
		return float(np.linalg.norm(self.values, ord))

	def __str__(self):
		t = '== BoundaryField ==\n'
		t+= 'Samples: %s\n' % len(self)
		t+= 'MaxAbs: %s\n' % self.norm()
		t+= 'SurfaceHash: %s\n' % self.surface_hash
		return t


class DenseOperator:
	def __init__(self, matrix, kind, k, surface_hash):
		self.matrix = matrix
		self.kind = kind
		self.k = as_wavenumber(k)
		self.surface_hash = surface_hash

	@property
	def size(self):
		return self.matrix.shape[0]

	def apply(self, field):
		if not isinstance(field, BoundaryField):
			return self.matrix @ np.asarray(field)
		field.check(self.surface_hash)
		return BoundaryField(self.matrix @ field.values, self.surface_hash)

	def __matmul__(self, field):
		return self.apply(field)

	def to_bytes(self):
		header = OperatorHeader()
		header.Size = self.size
		header.Kind = self.kind
		header.WaveNumber = complex(self.k)
		return header.to_bytes() + np.ascontiguousarray(self.matrix, dtype = '<c16').tobytes()

	@staticmethod
	def parse(buff, surface_hash = None):
		header = OperatorHeader.parse(buff)
		n = header.Size
		data = buff.read(16 * n * n)
		if len(data) != 16 * n * n:
			raise DomainError('Operator dump truncated: expected %d bytes of entries, got %d' % (16 * n * n, len(data)))
		matrix = np.frombuffer(data, dtype = '<c16').reshape(n, n).astype(np.complex128)
		return DenseOperator(matrix, header.Kind, header.WaveNumber, surface_hash)

	@staticmethod
	def from_bytes(data, surface_hash = None):
		return DenseOperator.parse(io.BytesIO(data), surface_hash)

	def dump(self, path):
		with open(path, 'wb') as f:
			f.write(self.to_bytes())

	@staticmethod
	def load(path, surface_hash = None):
		with open(path, 'rb') as f:
			return DenseOperator.parse(f, surface_hash)

	def __str__(self):
		t = '== DenseOperator ==\n'
		t+= 'Kind: %s\n' % self.kind.name
		t+= 'Size: %s\n' % self.size
		t+= 'WaveNumber: %s\n' % self.k
		t+= 'SurfaceHash: %s\n' % self.surface_hash
		return t


class BoundPlan:
	"""AssemblyPlan quadrature points realized on one surface"""
	def __init__(self):
		self.plan = None
		self.surface_hash = None
		self.x = None
		self.nx = None
		self.reg_y = None
		self.reg_nu = None
		self.reg_w = None
		self.duffy_y = None
		self.duffy_nu = None
		self.duffy_w = None
		self.near_y = None
		self.near_nu = None
		self.near_w = None
		self.operators = {}

	@property
	def near_rows(self):
		return self.plan.near_rows

	@property
	def near_cols(self):
		return self.plan.near_cols


class AssemblyPlan:
	"""
	Self, near and far interaction pattern frozen in flat parameter coordinates.

	Built once against a surface; bind() realizes it on any surface over the
	same reference mesh, so a family of shapes shares one quadrature pattern.
	"""
	def __init__(self):
		self.mesh = None
		self.rules = None
		self.reg_flat = None
		self.reg_w = None
		self.duffy_flat = None
		self.duffy_w = None
		self.near_rows = None
		self.near_cols = None
		self.near_flat = None
		self.near_w = None
		self.near_owner = None

	@property
	def n_near_pairs(self):
		return len(self.near_rows)

	@staticmethod
	def build(surface, rules = None):
		rules = rules or RuleSet()
		mesh = surface.mesh
		plan = AssemblyPlan()
		plan.mesh = mesh
		plan.rules = rules
		tri = mesh.vertices()
		plan.reg_flat, plan.reg_w = rules.regular.map(tri)
		plan.duffy_flat, plan.duffy_w = rules.duffy.map(tri)

		rows, cols = surface.near_pairs(surface.points, rules.eta, exclude = np.arange(mesh.n_panels))
		sub, owner = near_singular_split_batch(tri[cols], surface.points[rows], rules.eta, rules.max_depth, surface.map_points)
		near_flat, near_w = rules.regular.map(sub)
		plan.near_rows = rows
		plan.near_cols = cols
		plan.near_flat = near_flat.reshape(-1, 3)
		plan.near_w = near_w.reshape(-1)
		plan.near_owner = np.repeat(owner, len(rules.regular))
		logging.debug('Assembly plan: %d panels, %d near pairs, %d near sub-panels' % (mesh.n_panels, len(rows), len(sub)))
		return plan

	def bind(self, surface):
		if surface.mesh.signature() != self.mesh.signature():
			raise BindingError('Assembly plan built for mesh %s cannot bind to mesh %s' % (self.mesh.signature(), surface.mesh.signature()))
		fn = surface.mesh.flat_normals
		bound = BoundPlan()
		bound.plan = self
		bound.surface_hash = surface.shape_hash
		bound.x = surface.points
		bound.nx = surface.normals
		y, nu, jac = surface.map_reference(self.reg_flat, fn[:, None, :])
		bound.reg_y, bound.reg_nu, bound.reg_w = y, nu, self.reg_w * jac
		y, nu, jac = surface.map_reference(self.duffy_flat, fn[:, None, :])
		bound.duffy_y, bound.duffy_nu, bound.duffy_w = y, nu, self.duffy_w * jac
		y, nu, jac = surface.map_reference(self.near_flat, fn[self.near_cols[self.near_owner]])
		bound.near_y, bound.near_nu, bound.near_w = y, nu, self.near_w * jac
		return bound


def bound_plan(surface, rules = None, plan = None):
	"""Quadrature plan for surface: explicit plan, or one cached on the surface"""
	if isinstance(plan, BoundPlan):
		if plan.surface_hash != surface.shape_hash:
			raise BindingError('Bound plan belongs to another surface')
		return plan
	if isinstance(plan, AssemblyPlan):
		return plan.bind(surface)
	rules = rules or RuleSet()
	key = rules.key()
	if key not in surface._plans:
		surface._plans[key] = AssemblyPlan.build(surface, rules).bind(surface)
	return surface._plans[key]


def pin_plan(surface, plan):
	"""Bind plan to surface and make it the cached plan for the plan's rules"""
	bound = bound_plan(surface, plan = plan)
	surface._plans[bound.plan.rules.key()] = bound
	return bound


def _kernel(kind, k, xi, nx, ny):
	if kind == OperatorKind.V:
		return fund_sol(k, xi)
	if kind == OperatorKind.W:
		return double_layer_kernel(k, xi, ny)
	return adjoint_double_layer_kernel(k, xi, nx)


def _regular_block(kind, k, bp, rows):
	x = bp.x[rows]
	xi = x[:, None, None, :] - bp.reg_y[None, :, :, :]
	# the diagonal is replaced by the self-panel rule afterwards
	xi[np.arange(len(rows)), rows] = 1.0
	nx = bp.nx[rows][:, None, None, :]
	values = _kernel(kind, k, xi, nx, bp.reg_nu[None, :, :, :])
	return np.sum(values * bp.reg_w[None, :, :], axis = -1)


def _near_values(kind, k, bp):
	n_pairs = len(bp.near_rows)
	owner = bp.plan.near_owner
	sums = np.zeros(n_pairs, dtype = np.complex128)
	for start in range(0, len(owner), BLOCK_BUDGET):
		sl = slice(start, start + BLOCK_BUDGET)
		rows = bp.near_rows[owner[sl]]
		xi = bp.x[rows] - bp.near_y[sl]
		values = _kernel(kind, k, xi, bp.nx[rows], bp.near_nu[sl]) * bp.near_w[sl]
		sums += np.bincount(owner[sl], weights = values.real, minlength = n_pairs)
		sums += 1j * np.bincount(owner[sl], weights = values.imag, minlength = n_pairs)
	return sums


def _self_values(kind, k, bp):
	x = bp.x[:, None, :]
	if kind == OperatorKind.V:
		(sing, _), _ = split_laplace(k, x - bp.duffy_y)
		(_, smooth), _ = split_laplace(k, x - bp.reg_y)
	else:
		if kind == OperatorKind.W:
			normal_d, normal_r = -bp.duffy_nu, -bp.reg_nu
		else:
			normal_d = np.broadcast_to(bp.nx[:, None, :], bp.duffy_y.shape)
			normal_r = np.broadcast_to(bp.nx[:, None, :], bp.reg_y.shape)
		_, (sing, _) = split_laplace(k, x - bp.duffy_y, normal_d)
		_, (_, smooth) = split_laplace(k, x - bp.reg_y, normal_r)
	return np.sum(sing * bp.duffy_w, axis = -1) + np.sum(smooth * bp.reg_w, axis = -1)


def _assemble(kind, surface, k, rules = None, threads = 1, plan = None):
	k = as_wavenumber(k)
	bp = bound_plan(surface, rules, plan)
	key = (kind, k)
	if key in bp.operators:
		return bp.operators[key]

	n = surface.n_panels
	q = bp.reg_w.shape[1]
	block = max(1, BLOCK_BUDGET // (n * q))
	starts = list(range(0, n, block))
	matrix = np.empty((n, n), dtype = np.complex128)

	def fill(start):
		rows = np.arange(start, min(n, start + block))
		matrix[rows] = _regular_block(kind, k, bp, rows)

	if threads is not None and threads > 1:
		with ThreadPoolExecutor(max_workers = threads) as executor:
			list(executor.map(fill, starts))
	else:
		for start in starts:
			fill(start)

	matrix[bp.near_rows, bp.near_cols] = _near_values(kind, k, bp)
	matrix[np.arange(n), np.arange(n)] = _self_values(kind, k, bp)

	finite = np.isfinite(matrix)
	if not np.all(finite):
		i, j = np.argwhere(~finite)[0]
		raise AssemblyError('Non-finite %s entry at (%d, %d)' % (kind.name, i, j), row = int(i), col = int(j))

	logging.debug('Assembled %s: N=%d, k=%s, %d near pairs, %d threads' % (kind.name, n, k, len(bp.near_rows), threads or 1))
	op = DenseOperator(matrix, kind, k, surface.shape_hash)
	bp.operators[key] = op
	return op


def assemble_V(surface, k, rules = None, threads = 1, plan = None):
	"""Single layer: (V mu)_i = sum_j mu_j int_{panel j} S(k, x_i - y) dsigma_y"""
	return _assemble(OperatorKind.V, surface, k, rules, threads, plan)


def assemble_W(surface, k, rules = None, threads = 1, plan = None):
	"""Double layer with kernel -nu(y) . DS(k, x - y)"""
	return _assemble(OperatorKind.W, surface, k, rules, threads, plan)


def assemble_Wstar(surface, k, rules = None, threads = 1, plan = None):
	"""Adjoint double layer with kernel nu(x) . DS(k, x - y)"""
	return _assemble(OperatorKind.Wstar, surface, k, rules, threads, plan)


def assemble_lambda(surface, k, rules = None, threads = 1, plan = None, V = None, W = None):
	k = as_wavenumber(k)
	if V is None:
		V = assemble_V(surface, k, rules, threads, plan)
	if W is None:
		W = assemble_W(surface, k, rules, threads, plan)
	for op in (V, W):
		if op.surface_hash != surface.shape_hash:
			raise BindingError('%s operator belongs to another surface' % op.kind.name)
		if op.k != k:
			raise BindingError('%s operator was assembled for k=%s, not %s' % (op.kind.name, op.k, k))
	n = surface.n_panels
	matrix = W.matrix + k.coupling * V.matrix
	matrix[np.arange(n), np.arange(n)] -= 0.5
	return DenseOperator(matrix, OperatorKind.Lambda, k, surface.shape_hash)


class SolveDiagnostics:
	def __init__(self):
		self.residual = None
		self.condition = None
		self.size = None

	def to_dict(self):
		return {'residual' : self.residual, 'condition' : self.condition, 'size' : self.size}

	def __str__(self):
		t = '== SolveDiagnostics ==\n'
		t+= 'Residual: %s\n' % self.residual
		t+= 'Condition: %s\n' % self.condition
		t+= 'Size: %s\n' % self.size
		return t


class Factorization:
	"""LU factors with partial pivoting and a one-norm condition estimate"""
	def __init__(self, op):
		self.op = op
		matrix = op.matrix
		with warnings.catch_warnings():
			warnings.simplefilter('error', LinAlgWarning)
			try:
				self.lu, self.piv = lu_factor(matrix)
			except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as e:
				raise SolverError('Factorization of %s failed: %s' % (op.kind.name, e), condition = np.inf) from e
		if np.any(np.diag(self.lu) == 0):
			raise SolverError('%s is singular' % op.kind.name, condition = np.inf)
		anorm = np.linalg.norm(matrix, 1)
		gecon, = get_lapack_funcs(('gecon',), (self.lu,))
		rcond, info = gecon(self.lu, anorm, norm = '1')
		self.condition = np.inf if rcond == 0 else float(1.0 / rcond)

	def solve(self, rhs):
		return lu_solve((self.lu, self.piv), rhs)


def _residual(matrix, x, b):
	bn = np.linalg.norm(b)
	if bn == 0:
		return float(np.linalg.norm(matrix @ x))
	return float(np.linalg.norm(matrix @ x - b) / bn)


def solve_density(op, g, factorization = None):
	"""Solves op theta = g by dense LU; residual above tolerance is an error"""
	g.check(op.surface_hash, 'Datum')
	fact = factorization or Factorization(op)
	theta = fact.solve(g.values)
	diag = SolveDiagnostics()
	diag.size = op.size
	diag.condition = fact.condition
	diag.residual = _residual(op.matrix, theta, g.values)
	logging.debug('Solved %s system: residual %.3e, condition %.3e' % (op.kind.name, diag.residual, diag.condition))
	if not diag.residual <= RESIDUAL_TOLERANCE:
		raise SolverError('Relative residual %s exceeds %s' % (diag.residual, RESIDUAL_TOLERANCE), condition = diag.condition)
	return BoundaryField(theta, op.surface_hash), diag


def _factor_V(V, force):
	fact = Factorization(V)
	if fact.condition > CONDITION_LIMIT:
		logging.warning('Single layer operator condition estimate %.3e exceeds %.1e, k=%s is close to an interior Dirichlet eigenvalue' % (fact.condition, CONDITION_LIMIT, V.k))
		if not force:
			raise ResonanceError('Single layer operator is near-singular at k=%s (condition %.3e)' % (V.k, fact.condition), condition = fact.condition)
	return fact


def direct_flux_solve(surface, k, g, rules = None, threads = 1, plan = None, force = False, with_diagnostics = False):
	"""Neumann trace psi from V psi = (1/2 I + W) g"""
	k = as_wavenumber(k)
	g.check(surface.shape_hash, 'Datum')
	V = assemble_V(surface, k, rules, threads, plan)
	W = assemble_W(surface, k, rules, threads, plan)
	fact = _factor_V(V, force)
	rhs = 0.5 * g.values + W.matrix @ g.values
	psi = fact.solve(rhs)
	diag = SolveDiagnostics()
	diag.size = V.size
	diag.condition = fact.condition
	diag.residual = _residual(V.matrix, psi, rhs)
	if not diag.residual <= RESIDUAL_TOLERANCE:
		raise SolverError('Relative residual %s exceeds %s' % (diag.residual, RESIDUAL_TOLERANCE), condition = diag.condition)
	psi = BoundaryField(psi, surface.shape_hash)
	if with_diagnostics:
		return psi, diag
	return psi


def dtn_matrix(surface, k, method = NeumannMethod.DIRECT, rules = None, threads = 1, plan = None, force = False):
	"""Dense Dirichlet-to-Neumann pullback, column j is the flux of the j-th unit datum"""
	k = as_wavenumber(k)
	n = surface.n_panels
	eye = np.eye(n)
	if method == NeumannMethod.DIRECT:
		V = assemble_V(surface, k, rules, threads, plan)
		W = assemble_W(surface, k, rules, threads, plan)
		fact = _factor_V(V, force)
		matrix = fact.solve(0.5 * eye + W.matrix)
	else:
		# imported here, fields depends on this module
		from helmscatter.fields import double_layer_normal_derivative_matrix
		lam = assemble_lambda(surface, k, rules, threads, plan)
		Ws = assemble_Wstar(surface, k, rules, threads, plan)
		fact = Factorization(lam)
		inverse = fact.solve(eye)
		dn, _ = double_layer_normal_derivative_matrix(surface, k, rules, threads)
		matrix = (dn + k.coupling * (0.5 * eye + Ws.matrix)) @ inverse
	logging.debug('DtN matrix (%s) of size %d assembled' % (method.value, n))
	return DenseOperator(matrix, OperatorKind.custom, k, surface.shape_hash)

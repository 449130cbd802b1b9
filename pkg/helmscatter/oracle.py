#!/usr/bin/env python3
#
# Closed-form reference solutions. Nothing here calls the assembly or the
# solvers, only the analytic kernels and container types.
#

import math
import logging

import numpy as np
from scipy.special import eval_legendre

from helmscatter.constants import DatumKind, FarFieldRoute, FOUR_PI
from helmscatter.exceptions import DomainError
from helmscatter.kernels import as_wavenumber, fund_sol, grad_fund_sol
from helmscatter.operators import BoundaryField
from helmscatter.fields import FarFieldGrid

MAX_BESSEL_ORDER = 60
# extra orders for the downward recurrence start
MILLER_MARGIN = 40
RESCALE_LIMIT = 1e250


class DirichletDatum:
	def __init__(self, kind, value = None, source = None, direction = None, values = None):
		self.kind = kind
		self.value = value
		self.source = source
		self.direction = direction
		self.values = values

	@staticmethod
	def constant(c = 1.0):
		return DirichletDatum(DatumKind.CONSTANT, value = complex(c))

	@staticmethod
	def point_source(z):
		z = np.asarray(z, dtype = np.float64).reshape(3)
		return DirichletDatum(DatumKind.POINT_SOURCE, source = z)

	@staticmethod
	def plane_wave(d):
		d = np.asarray(d, dtype = np.float64).reshape(3)
		if abs(np.linalg.norm(d) - 1.0) > 1e-12:
			raise DomainError('Plane wave direction must be a unit vector, |d| = %s' % np.linalg.norm(d))
		return DirichletDatum(DatumKind.PLANE_WAVE, direction = d)

	@staticmethod
	def custom(values):
		return DirichletDatum(DatumKind.CUSTOM, values = np.asarray(values, dtype = np.complex128))

	@staticmethod
	def parse(token):
		"""constant:re[,im] | point:x,y,z | plane:dx,dy,dz"""
		name, _, params = str(token).partition(':')
		try:
			nums = [float(p) for p in params.split(',') if p.strip() != '']
		except ValueError as e:
			raise DomainError('Cannot parse datum %r' % (token,)) from e
		if name == 'constant':
			if len(nums) not in (1, 2):
				raise DomainError('constant datum takes re[,im], got %r' % (token,))
			return DirichletDatum.constant(complex(nums[0], nums[1] if len(nums) == 2 else 0.0))
		if name == 'point' and len(nums) == 3:
			return DirichletDatum.point_source(nums)
		if name == 'plane' and len(nums) == 3:
			d = np.asarray(nums)
			return DirichletDatum.plane_wave(d / np.linalg.norm(d))
		raise DomainError('Cannot parse datum %r' % (token,))

	def to_dict(self):
		d = {'kind' : self.kind.value}
		if self.kind == DatumKind.CONSTANT:
			d['value'] = [self.value.real, self.value.imag]
		elif self.kind == DatumKind.POINT_SOURCE:
			d['source'] = self.source.tolist()
		elif self.kind == DatumKind.PLANE_WAVE:
			d['direction'] = self.direction.tolist()
		else:
			d['values'] = [[v.real, v.imag] for v in self.values]
		return d

	@staticmethod
	def from_dict(d):
		kind = DatumKind(d['kind'])
		if kind == DatumKind.CONSTANT:
			return DirichletDatum.constant(complex(*d['value']))
		if kind == DatumKind.POINT_SOURCE:
			return DirichletDatum.point_source(d['source'])
		if kind == DatumKind.PLANE_WAVE:
			return DirichletDatum.plane_wave(d['direction'])
		return DirichletDatum.custom([complex(*v) for v in d['values']])

	def __str__(self):
		t = '== DirichletDatum ==\n'
		for k, v in self.to_dict().items():
			t += '%s: %s\n' % (k, v)
		return t


def _check_source(surface, z):
	clearance = float(np.min(np.linalg.norm(surface.probes() - z, axis = -1)))
	if not clearance > 0.5 * surface.max_diameter:
		raise DomainError('Point source %s is on or too close to the surface (clearance %.4g)' % (z.tolist(), clearance))
	if not surface.contains(z[None, :])[0]:
		raise DomainError('Point source %s is outside the obstacle' % (z.tolist(),))


def realize_datum(spec, surface, k):
	"""Samples g at the collocation points phi(c_i)"""
	k = as_wavenumber(k)
	if spec.kind == DatumKind.CONSTANT:
		values = np.full(surface.n_panels, spec.value, dtype = np.complex128)
	elif spec.kind == DatumKind.POINT_SOURCE:
		_check_source(surface, spec.source)
		values = fund_sol(k, surface.points - spec.source)
	elif spec.kind == DatumKind.PLANE_WAVE:
		values = -np.exp(1j * complex(k) * (surface.points @ spec.direction))
	else:
		values = spec.values
	return BoundaryField.on(surface, values)


class PointSourceExact:
	"""u(x) = S(k, x - z) for a source z inside the obstacle"""
	def __init__(self, z, k):
		self.z = np.asarray(z, dtype = np.float64).reshape(3)
		self.k = as_wavenumber(k)

	def field(self, x):
		return fund_sol(self.k, np.asarray(x) - self.z)

	def gradient(self, x):
		return grad_fund_sol(self.k, np.asarray(x) - self.z)

	def flux(self, points, normals):
		return np.sum(np.asarray(normals) * self.gradient(points), axis = -1)

	def far_field(self, directions):
		d = np.asarray(directions, dtype = np.float64).reshape(-1, 3)
		return -np.exp(-1j * complex(self.k) * (d @ self.z)) / FOUR_PI


def point_source_exact(z, k):
	return PointSourceExact(z, k)


class RadialSphereExact:
	"""u = rho exp(ik(|x| - rho)) / |x| outside the radius rho sphere, datum 1"""
	def __init__(self, rho, k):
		if not rho > 0:
			raise DomainError('Sphere radius must be positive, got %s' % rho)
		self.rho = float(rho)
		self.k = as_wavenumber(k)

	def field(self, x):
		r = np.linalg.norm(np.asarray(x, dtype = np.float64), axis = -1)
		return self.rho * np.exp(1j * complex(self.k) * (r - self.rho)) / r

	def gradient(self, x):
		x = np.asarray(x, dtype = np.float64)
		r = np.linalg.norm(x, axis = -1)
		du = self.field(x) * (1j * complex(self.k) - 1.0 / r)
		return (du / r)[..., None] * x

	def flux(self):
		return 1j * complex(self.k) - 1.0 / self.rho

	def far_field(self, directions = None):
		value = self.rho * np.exp(-1j * complex(self.k) * self.rho)
		if directions is None:
			return value
		d = np.asarray(directions).reshape(-1, 3)
		return np.full(len(d), value, dtype = np.complex128)

	def far_field_radius_derivative(self):
		"""d/d rho of rho exp(-ik rho)"""
		kv = complex(self.k)
		return np.exp(-1j * kv * self.rho) * (1.0 - 1j * kv * self.rho)


def radial_sphere_exact(rho, k):
	return RadialSphereExact(rho, k)


def _miller_j(lmax, z):
	top = lmax + int(abs(z)) + MILLER_MARGIN
	vals = np.zeros(top + 2, dtype = np.complex128)
	vals[top] = 1e-30
	for n in range(top, 0, -1):
		vals[n - 1] = (2 * n + 1) / z * vals[n] - vals[n + 1]
		if abs(vals[n - 1]) > RESCALE_LIMIT:
			vals /= RESCALE_LIMIT
	j0 = np.sin(z) / z
	j1 = np.sin(z) / (z * z) - np.cos(z) / z
	if abs(j0) >= abs(j1):
		scale = j0 / vals[0]
	else:
		scale = j1 / vals[1]
	return vals[:lmax + 1] * scale


def spherical_bessel_hankel_sequence(lmax, z):
	"""j_l(z) and h_l(z) (first kind) for l = 0..lmax"""
	if lmax < 0 or lmax > MAX_BESSEL_ORDER:
		raise DomainError('Order must lie in 0..%d, got %s' % (MAX_BESSEL_ORDER, lmax))
	return _sequence(lmax, z)


def _sequence(lmax, z):
	z = complex(z)
	if z == 0:
		raise DomainError('Spherical Hankel function is singular at z = 0')
	j = _miller_j(max(lmax, 1), z)[:lmax + 1]
	h = np.zeros(max(lmax, 1) + 1, dtype = np.complex128)
	e = np.exp(1j * z)
	h[0] = -1j * e / z
	h[1] = -e * (z + 1j) / (z * z)
	for n in range(1, lmax):
		h[n + 1] = (2 * n + 1) / z * h[n] - h[n - 1]
	return j, h[:lmax + 1]


def spherical_bessel_hankel(l, z, derivative = False):
	"""
	Returns (j_l(z), h_l(z)); with derivative=True also (j_l'(z), h_l'(z))
	from f_l' = f_{l-1} - (l + 1) f_l / z and f_0' = -f_1.
	"""
	if l < 0 or l > MAX_BESSEL_ORDER:
		raise DomainError('Order must lie in 0..%d, got %s' % (MAX_BESSEL_ORDER, l))
	j, h = _sequence(l + 1, z)
	if not derivative:
		return j[l], h[l]
	z = complex(z)
	if l == 0:
		dj, dh = -j[1], -h[1]
	else:
		dj = j[l - 1] - (l + 1) * j[l] / z
		dh = h[l - 1] - (l + 1) * h[l] / z
	return j[l], h[l], dj, dh


def mie_coefficients(k, L):
	"""Far field coefficients (i/k) (2l + 1) j_l(k) / h_l(k) for l = 0..L"""
	j, h = spherical_bessel_hankel_sequence(L, k)
	l = np.arange(L + 1)
	return (1j / k) * (2 * l + 1) * j / h


def mie_far_field(k, d, L, directions):
	"""
	Sound-soft unit sphere hit by exp(ik x.d): u_s = -exp(ik x.d) on |x| = 1 and
	u_inf(xhat) = (i/k) sum_l (2l + 1) j_l(k) / h_l(k) P_l(xhat . d).
	"""
	kv = complex(k)
	if kv.imag != 0 or not kv.real > 0:
		raise DomainError('Mie series needs real k > 0, got %s' % (kv,))
	k = kv.real
	if L < math.ceil(k) + 10:
		raise DomainError('Truncation L=%d is below ceil(k) + 10 = %d' % (L, math.ceil(k) + 10))
	d = np.asarray(d, dtype = np.float64).reshape(3)
	dirs = np.asarray(directions, dtype = np.float64).reshape(-1, 3)
	dirs = dirs / np.linalg.norm(dirs, axis = -1, keepdims = True)
	coeffs = mie_coefficients(k, L)
	cosines = np.clip(dirs @ d, -1.0, 1.0)
	values = np.zeros(len(dirs), dtype = np.complex128)
	for l, c in enumerate(coeffs):
		values += c * eval_legendre(l, cosines)
	logging.debug('Mie series k=%s, L=%d, last coefficient %.3e' % (k, L, abs(coeffs[-1])))
	grid = FarFieldGrid(dirs, values, FarFieldRoute.MIE)
	grid.metadata = {'k' : [k, 0.0], 'L' : int(L), 'incidence' : d.tolist()}
	grid.coefficients = coeffs
	return grid

#!/usr/bin/env python3
#
# Fundamental solution S(k, x) = -exp(ik|x|) / (4 pi |x|) and the kernels built
# from it. Every function broadcasts over leading axes; vectors live on the last axis.
#

import math

import numpy as np

from helmscatter.constants import FOUR_PI
from helmscatter.exceptions import DomainError

# below this |kr| the difference kernels are summed from their Taylor series
SERIES_THRESHOLD = 1e-2
SERIES_TERMS = 12


class WaveNumber:
	"""Complex wave number k with Im k >= 0"""
	def __init__(self, value):
		value = complex(value)
		if not np.isfinite(value.real) or not np.isfinite(value.imag):
			raise DomainError('Wave number must be finite, got %s' % (value,))
		if value.imag < 0:
			raise DomainError('Wave number %s is outside C+ (complex numbers with nonnegative imaginary part)' % (value,))
		self.value = value

	@staticmethod
	def parse(text):
		"""Parses 'RE,IM' or 'RE'"""
		parts = [p for p in str(text).split(',') if p.strip() != '']
		if len(parts) == 1:
			return WaveNumber(complex(float(parts[0]), 0.0))
		if len(parts) == 2:
			return WaveNumber(complex(float(parts[0]), float(parts[1])))
		raise DomainError('Cannot parse wave number from %r' % (text,))

	@property
	def real(self):
		return self.value.real

	@property
	def imag(self):
		return self.value.imag

	@property
	def coupling(self):
		"""Coupling constant 1 - i Re k of the combined field operator"""
		return 1.0 - 1j * self.value.real

	def __complex__(self):
		return self.value

	def __eq__(self, other):
		if isinstance(other, WaveNumber):
			return self.value == other.value
		return NotImplemented

	def __hash__(self):
		return hash(self.value)

	def __repr__(self):
		return 'WaveNumber(%r)' % (self.value,)

	def __str__(self):
		return '%s' % (self.value,)


def as_wavenumber(k):
	if isinstance(k, WaveNumber):
		return k
	return WaveNumber(k)


def _radius(xi):
	xi = np.asarray(xi, dtype = np.float64)
	if xi.shape[-1] != 3:
		raise DomainError('Expected 3-vectors on the last axis, got shape %s' % (xi.shape,))
	r = np.sqrt(np.sum(xi * xi, axis = -1))
	if np.any(r == 0.0):
		raise DomainError('Kernel evaluated at xi = 0')
	return xi, r


def fund_sol(k, xi):
	"""S(k, xi) = -exp(ik|xi|) / (4 pi |xi|)"""
	kv = complex(as_wavenumber(k))
	xi, r = _radius(xi)
	return -np.exp(1j * kv * r) / (FOUR_PI * r)


def grad_fund_sol(k, xi):
	"""Gradient of S(k, .) at xi: exp(ikr)(1 - ikr) / (4 pi r^3) * xi"""
	kv = complex(as_wavenumber(k))
	xi, r = _radius(xi)
	f = np.exp(1j * kv * r) * (1.0 - 1j * kv * r) / (FOUR_PI * r ** 3)
	return f[..., None] * xi


def hessian_terms(k, xi):
	"""Scalars (f, g) with Hessian of S = f I + g xi xi^T"""
	kv = complex(as_wavenumber(k))
	xi, r = _radius(xi)
	e = np.exp(1j * kv * r)
	f = e * (1.0 - 1j * kv * r) / (FOUR_PI * r ** 3)
	g = e * ((kv * r) ** 2 + 3j * kv * r - 3.0) / (FOUR_PI * r ** 5)
	return f, g


def double_layer_kernel(k, xi, nu_y):
	"""-nu(y) . DS(k, x - y), the kernel of w and W"""
	return -np.sum(np.asarray(nu_y) * grad_fund_sol(k, xi), axis = -1)


def adjoint_double_layer_kernel(k, xi, nu_x):
	"""nu(x) . DS(k, x - y), the kernel of W*"""
	return np.sum(np.asarray(nu_x) * grad_fund_sol(k, xi), axis = -1)


def double_layer_gradient_kernel(k, xi, nu_y, direction, subtract_static = False):
	"""
	direction . grad_x of the double layer kernel: -direction^T H(x - y) nu(y).
	With subtract_static the k = 0 kernel is removed, leaving a 1/r type remainder.
	"""
	kv = complex(as_wavenumber(k))
	xi, r = _radius(xi)
	nu_y = np.asarray(nu_y, dtype = np.float64)
	direction = np.asarray(direction, dtype = np.float64)
	d_nu = np.sum(direction * nu_y, axis = -1)
	d_xi = np.sum(direction * xi, axis = -1)
	xi_nu = np.sum(xi * nu_y, axis = -1)
	if subtract_static:
		e = np.exp(1j * kv * r)
		f = kv * kv * _psi(kv * r) / (FOUR_PI * r)
		g = (e * ((kv * r) ** 2 + 3j * kv * r - 3.0) + 3.0) / (FOUR_PI * r ** 5)
	else:
		f, g = hessian_terms(kv, xi)
	return -(f * d_nu + g * d_xi * xi_nu)


def _phi1(z):
	"""(exp(z) - 1) / z without cancellation near 0"""
	z = np.asarray(z, dtype = np.complex128)
	shape = z.shape
	z = z.reshape(-1)
	out = np.empty_like(z)
	small = np.abs(z) < SERIES_THRESHOLD
	big = ~small
	out[big] = (np.exp(z[big]) - 1.0) / z[big]
	zs = z[small]
	acc = np.zeros_like(zs)
	term = np.ones_like(zs)
	for n in range(1, SERIES_TERMS):
		acc += term
		term = term * zs / (n + 1)
	out[small] = acc
	return out.reshape(shape)


def _psi(z):
	"""(exp(iz)(1 - iz) - 1) / z^2, bounded with limit 1/2"""
	z = np.asarray(z, dtype = np.complex128)
	shape = z.shape
	z = z.reshape(-1)
	out = np.empty_like(z)
	small = np.abs(z) < SERIES_THRESHOLD
	big = ~small
	zb = z[big]
	out[big] = (np.exp(1j * zb) * (1.0 - 1j * zb) - 1.0) / (zb * zb)
	zs = z[small]
	acc = np.zeros_like(zs)
	for m in range(2, SERIES_TERMS + 2):
		acc += (1 - m) * (1j ** m) * zs ** (m - 2) / math.factorial(m)
	out[small] = acc
	return out.reshape(shape)


def split_limits(k):
	"""Values of the smooth parts at xi -> 0: (single, radial double)"""
	kv = complex(as_wavenumber(k))
	return -1j * kv / FOUR_PI, kv * kv / (2.0 * FOUR_PI)


def split_laplace(k, xi, normal = None):
	"""
	Splits S and its directional derivative into the k = 0 part and a bounded remainder.

	The double entries are normal . DS(k, xi); with normal=None the radial
	direction xi/|xi| is used. Returns ((single_singular, single_smooth),
	(double_singular, double_smooth)).
	"""
	kv = complex(as_wavenumber(k))
	xi, r = _radius(xi)
	if normal is None:
		cos_n = np.ones_like(r)
	else:
		cos_n = np.sum(np.asarray(normal, dtype = np.float64) * xi, axis = -1) / r

	s_sing = -1.0 / (FOUR_PI * r) + 0j
	s_smooth = -(1j * kv) * _phi1(1j * kv * r) / FOUR_PI
	# n . DS_0 = (n . xi) / (4 pi r^3)
	d_sing = cos_n / (FOUR_PI * r * r) + 0j
	d_smooth = cos_n * kv * kv * _psi(kv * r) / FOUR_PI
	return (s_sing, s_smooth), (d_sing, d_smooth)


def farfield_kernels(k, xhat, y, nu):
	"""
	Far field kernels of the single and double layer in the expansion
	u ~ exp(ik|x|)/|x| (u_inf + O(1/|x|)).
	"""
	kv = complex(as_wavenumber(k))
	xhat = np.asarray(xhat, dtype = np.float64)
	y = np.asarray(y, dtype = np.float64)
	nu = np.asarray(nu, dtype = np.float64)
	phase = np.exp(-1j * kv * np.sum(xhat * y, axis = -1))
	single = -phase / FOUR_PI
	double = (1j * kv / FOUR_PI) * np.sum(xhat * nu, axis = -1) * phase
	return single, double


def radiation_residual(u, grad_u, x, k):
	"""|x| (du/dr - i k u)"""
	kv = complex(as_wavenumber(k))
	x = np.asarray(x, dtype = np.float64)
	r = np.sqrt(np.sum(x * x, axis = -1))
	if np.any(r == 0.0):
		raise DomainError('Radiation residual needs |x| > 0')
	du_dr = np.sum(np.asarray(grad_u) * x, axis = -1) / r
	return r * (du_dr - 1j * kv * np.asarray(u))

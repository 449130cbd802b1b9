import numpy as np
import pytest

from helmscatter.exceptions import DomainError
from helmscatter.kernels import WaveNumber, fund_sol, grad_fund_sol, hessian_terms, split_laplace, \
	split_limits, double_layer_kernel, adjoint_double_layer_kernel, double_layer_gradient_kernel, \
	farfield_kernels, radiation_residual

FOUR_PI = 4.0 * np.pi
XI = np.array([[0.3, -0.2, 0.5], [1.0, 2.0, -0.5], [-0.05, 0.02, 0.01]])


def hessian(k, xi):
	f, g = hessian_terms(k, xi)
	return f[:, None, None] * np.eye(3) + g[:, None, None] * (xi[:, :, None] * xi[:, None, :])


def test_wavenumber():
	k = WaveNumber.parse('1,0.5')
	assert complex(k) == complex(1.0, 0.5)
	assert k.coupling == complex(1.0, -1.0)
	assert WaveNumber.parse('2') == WaveNumber(2.0)
	with pytest.raises(DomainError):
		WaveNumber(complex(1.0, -0.1))
	with pytest.raises(DomainError):
		WaveNumber.parse('1,2,3')


def test_fund_sol_values():
	assert fund_sol(0.0, np.array([1.0, 0.0, 0.0])) == pytest.approx(-1.0 / FOUR_PI)
	k = complex(1.0, 0.5)
	r = np.linalg.norm(XI, axis = -1)
	assert np.allclose(fund_sol(k, XI), -np.exp(1j * k * r) / (FOUR_PI * r))


def test_fund_sol_zero():
	with pytest.raises(DomainError):
		fund_sol(1.0, np.zeros(3))


@pytest.mark.parametrize('k', [0.0, 1.0, complex(1.0, 0.5), 2.0])
def test_gradient_and_hessian_by_differences(k):
	h = 1e-6
	grad = grad_fund_sol(k, XI)
	hess = hessian(k, XI)
	for axis in range(3):
		e = np.zeros(3)
		e[axis] = h
		d = (fund_sol(k, XI + e) - fund_sol(k, XI - e)) / (2.0 * h)
		assert np.allclose(grad[:, axis], d, rtol = 1e-6, atol = 0)
		dg = (grad_fund_sol(k, XI + e) - grad_fund_sol(k, XI - e)) / (2.0 * h)
		assert np.allclose(hess[:, :, axis], dg, rtol = 1e-5, atol = 1e-8 * np.max(np.abs(dg)))


def test_layer_kernels():
	k = complex(2.0, 0.1)
	nu = np.array([0.0, 0.6, 0.8])
	grad = grad_fund_sol(k, XI)
	assert np.allclose(double_layer_kernel(k, XI, nu), -grad @ nu)
	assert np.allclose(adjoint_double_layer_kernel(k, XI, nu), grad @ nu)


@pytest.mark.parametrize('r', [1e-5, 1e-3, 0.1, 2.0])
def test_split_laplace_sums(r):
	k = complex(1.5, 0.3)
	xi = r * np.array([[0.6, 0.0, 0.8]])
	normal = np.array([[0.0, 1.0, 0.0]]) * 0.3 + np.array([[0.6, 0.0, 0.8]])
	normal = normal / np.linalg.norm(normal)
	(s_sing, s_smooth), (d_sing, d_smooth) = split_laplace(k, xi, normal)
	full_s = fund_sol(k, xi)
	full_d = np.sum(normal * grad_fund_sol(k, xi), axis = -1)
	assert np.allclose(s_sing + s_smooth, full_s, rtol = 1e-10, atol = 0)
	assert np.allclose(d_sing + d_smooth, full_d, rtol = 1e-9, atol = 0)


def test_split_limits():
	k = complex(1.0, 0.5)
	single, radial = split_limits(k)
	(_, s_smooth), (_, d_smooth) = split_laplace(k, np.array([[1e-9, 0.0, 0.0]]))
	assert s_smooth[0] == pytest.approx(single, rel = 1e-6)
	assert d_smooth[0] == pytest.approx(radial, rel = 1e-6)


@pytest.mark.parametrize('k', [1.0, complex(0.5, 0.5)])
def test_double_layer_gradient_subtraction(k):
	nu = np.array([0.0, 0.6, 0.8])
	d = np.array([1.0, 0.0, 0.0])
	full = double_layer_gradient_kernel(k, XI, nu, d)
	static = double_layer_gradient_kernel(0.0, XI, nu, d)
	diff = double_layer_gradient_kernel(k, XI, nu, d, subtract_static = True)
	assert np.allclose(full - static, diff, rtol = 1e-7, atol = 1e-10)
	hess = hessian(k, XI)
	assert np.allclose(full, -np.einsum('i,nij,j->n', d, hess, nu))


def test_farfield_kernels_asymptotics():
	k = 1.0
	xhat = np.array([0.48, 0.6, 0.64])
	y = np.array([0.2, -0.1, 0.3])
	nu = np.array([0.0, 0.0, 1.0])
	R = 1e6
	x = R * xhat
	scale = R * np.exp(-1j * k * R)
	single, double = farfield_kernels(k, xhat, y, nu)
	assert scale * fund_sol(k, x - y) == pytest.approx(single, rel = 1e-4)
	assert scale * double_layer_kernel(k, x - y, nu) == pytest.approx(double, rel = 1e-4)


def test_radiation_residual_of_point_source():
	k = complex(1.0, 0.2)
	x = np.array([[10.0, 0.0, 0.0], [0.0, 20.0, 5.0]])
	res = radiation_residual(fund_sol(k, x), grad_fund_sol(k, x), x, k)
	r = np.linalg.norm(x, axis = -1)
	assert np.allclose(res, np.exp(1j * k * r) / (FOUR_PI * r))

import numpy as np
import pytest
from scipy.special import spherical_jn, spherical_yn

from helmscatter.constants import DatumKind
from helmscatter.exceptions import DomainError
from helmscatter.geometry import ShapeMap, Bump, build_surface
from helmscatter.operators import assemble_lambda, solve_density
from helmscatter.fields import far_field_direct, sphere_directions, eval_solution
from helmscatter.oracle import DirichletDatum, realize_datum, point_source_exact, radial_sphere_exact, \
	spherical_bessel_hankel, spherical_bessel_hankel_sequence, mie_coefficients, mie_far_field

SOURCE = (0.2, 0.1, -0.1)


def test_low_orders():
	j, h = spherical_bessel_hankel(0, 1.0)
	assert j == pytest.approx(np.sin(1.0), rel = 1e-14)
	assert h == pytest.approx(np.sin(1.0) - 1j * np.cos(1.0), rel = 1e-14)


def test_wronskian():
	z = 2.7
	for l in (0, 1, 5, 12):
		j, h, dj, dh = spherical_bessel_hankel(l, z, derivative = True)
		assert j * dh - dj * h == pytest.approx(1j / z ** 2, rel = 1e-12)


def test_against_scipy():
	for z in (0.3, 1.0, 2.0, 7.5):
		j, h = spherical_bessel_hankel_sequence(30, z)
		l = np.arange(31)
		jr = spherical_jn(l, z)
		yr = spherical_yn(l, z)
		assert np.allclose(j, jr, rtol = 1e-10, atol = 1e-300)
		assert np.allclose(h.imag, yr, rtol = 1e-10)


def test_bessel_guards():
	with pytest.raises(DomainError):
		spherical_bessel_hankel(61, 1.0)
	with pytest.raises(DomainError):
		spherical_bessel_hankel_sequence(-1, 1.0)
	with pytest.raises(DomainError, match = 'z = 0'):
		spherical_bessel_hankel(2, 0.0)


def test_mie_guards():
	d = (0.0, 0.0, 1.0)
	with pytest.raises(DomainError, match = 'ceil'):
		mie_far_field(2.0, d, 11, [d])
	with pytest.raises(DomainError, match = 'real k'):
		mie_far_field(1.0 + 0.5j, d, 20, [d])
	with pytest.raises(DomainError):
		mie_far_field(0.0, d, 20, [d])


def test_mie_tail_and_symmetry():
	coeffs = mie_coefficients(2.0, 20)
	assert abs(coeffs[-1]) < 1e-15 * abs(coeffs[0]) or abs(coeffs[-1]) < 1e-20
	grid = mie_far_field(2.0, (0.0, 0.0, 1.0), 20, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
	# rotationally symmetric about the incidence direction
	assert grid.values[0] == pytest.approx(grid.values[1], abs = 1e-14)
	assert grid.metadata['L'] == 20


def test_mie_monopole_term():
	# l = 0 coefficient equals the far field of the radial solution with datum -j_0(k)
	k = 1.3
	c0 = mie_coefficients(k, 20)[0]
	expected = -np.sin(k) / k * radial_sphere_exact(1.0, k).far_field()
	assert c0 == pytest.approx(expected, rel = 1e-12)


def test_point_source_exact():
	ex = point_source_exact(SOURCE, 1.0)
	x = np.array([[30.0, 0.0, 0.0]])
	r = np.linalg.norm(x[0])
	asym = ex.far_field([[1.0, 0.0, 0.0]])[0] * np.exp(1j * r) / r
	assert abs(ex.field(x)[0] - asym) < 5e-3 / r
	flux = ex.flux(np.array([[1.0, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0]]))
	assert flux.shape == (1,)


def test_radial_exact():
	ex = radial_sphere_exact(1.5, 2.0)
	assert ex.field([1.5, 0.0, 0.0]) == pytest.approx(1.0)
	assert ex.flux() == pytest.approx(2j - 1.0 / 1.5)
	assert ex.far_field() == pytest.approx(1.5 * np.exp(-3j))
	h = 1e-6
	dnum = (radial_sphere_exact(1.5 + h, 2.0).far_field() - radial_sphere_exact(1.5 - h, 2.0).far_field()) / (2 * h)
	assert ex.far_field_radius_derivative() == pytest.approx(dnum, rel = 1e-8)
	with pytest.raises(DomainError):
		radial_sphere_exact(0.0, 1.0)


def test_datum_tokens():
	assert DirichletDatum.parse('constant:2').value == 2.0
	assert DirichletDatum.parse('constant:1,-1').value == 1 - 1j
	assert DirichletDatum.parse('point:0.1,0,0').kind == DatumKind.POINT_SOURCE
	pw = DirichletDatum.parse('plane:0,0,2')
	assert np.allclose(pw.direction, [0, 0, 1])
	for bad in ('plane:1,0', 'constant:', 'wave:1', 'point:a,b,c'):
		with pytest.raises(DomainError):
			DirichletDatum.parse(bad)
	with pytest.raises(DomainError, match = 'unit vector'):
		DirichletDatum.plane_wave((0.0, 0.0, 2.0))


def test_datum_dict():
	for datum in (DirichletDatum.constant(1 + 2j), DirichletDatum.point_source(SOURCE), DirichletDatum.plane_wave((1.0, 0.0, 0.0)), DirichletDatum.custom([1.0, 2j])):
		back = DirichletDatum.from_dict(datum.to_dict())
		assert back.to_dict() == datum.to_dict()


def test_realize_datum(sphere1):
	g = realize_datum(DirichletDatum.constant(2.0), sphere1, 1.0)
	assert np.all(g.values == 2.0)
	pw = realize_datum(DirichletDatum.plane_wave((0.0, 0.0, 1.0)), sphere1, 1.0)
	assert np.allclose(pw.values, -np.exp(1j * sphere1.points[:, 2]))
	with pytest.raises(DomainError, match = 'outside'):
		realize_datum(DirichletDatum.point_source((3.0, 0.0, 0.0)), sphere1, 1.0)
	with pytest.raises(DomainError, match = 'close'):
		realize_datum(DirichletDatum.point_source(sphere1.points[0]), sphere1, 1.0)


def _point_source_error(surface, k):
	g = realize_datum(DirichletDatum.point_source(SOURCE), surface, k)
	theta, _ = solve_density(assemble_lambda(surface, k), g)
	dirs = sphere_directions(50)
	bem = far_field_direct(surface, k, theta, dirs)
	return bem.relative_error(point_source_exact(SOURCE, k).far_field(dirs))


def test_point_source_master_sphere(sphere2):
	assert _point_source_error(sphere2, 1.0) < 1e-1


def test_point_source_master_static(ellipsoid2):
	assert _point_source_error(ellipsoid2, 0.0) < 1e-1


def test_point_source_field_near(sphere2):
	k = 1.0
	g = realize_datum(DirichletDatum.point_source(SOURCE), sphere2, k)
	theta, _ = solve_density(assemble_lambda(sphere2, k), g)
	x = np.array([[2.0, 0.0, 0.0], [0.0, 0.0, -3.0]])
	u = eval_solution(sphere2, k, theta, x)
	exact = point_source_exact(SOURCE, k).field(x)
	assert np.max(np.abs(u - exact)) / np.max(np.abs(exact)) < 1e-1


def test_bem_against_mie(sphere2):
	k = 1.0
	d = np.array([0.0, 0.0, 1.0])
	g = realize_datum(DirichletDatum.plane_wave(d), sphere2, k)
	theta, _ = solve_density(assemble_lambda(sphere2, k), g)
	dirs = sphere_directions(40)
	bem = far_field_direct(sphere2, k, theta, dirs)
	assert bem.relative_error(mie_far_field(k, d, 20, dirs)) < 1e-1


@pytest.mark.slow
@pytest.mark.parametrize('shape', [
	ShapeMap.identity(),
	ShapeMap.axes_scale(1.0, 1.3, 0.7),
	ShapeMap.radial_star([Bump((0.0, 0.0, 1.0), 0.5, 0.15)]),
])
@pytest.mark.parametrize('k', [0.0, 1.0, 1.0 + 0.5j, 2.0])
def test_point_source_acceptance(shape, k):
	surface = build_surface(shape, 3)
	assert _point_source_error(surface, k) <= 1e-2


@pytest.mark.slow
def test_mie_acceptance():
	surface = build_surface(ShapeMap.identity(), 3)
	k = 2.0
	d = np.array([0.0, 0.0, 1.0])
	g = realize_datum(DirichletDatum.plane_wave(d), surface, k)
	theta, _ = solve_density(assemble_lambda(surface, k), g)
	dirs = sphere_directions(50)
	bem = far_field_direct(surface, k, theta, dirs)
	assert bem.relative_error(mie_far_field(k, d, 20, dirs)) <= 2e-2


@pytest.mark.slow
@pytest.mark.parametrize('shape, factor', [
	(ShapeMap.identity(), 1.7),
	(ShapeMap.axes_scale(1.0, 1.3, 0.7), 1.5),
])
def test_point_source_convergence(shape, factor):
	coarse, fine = [_point_source_error(build_surface(shape, level), 1.0) for level in (2, 3)]
	assert coarse / fine >= factor

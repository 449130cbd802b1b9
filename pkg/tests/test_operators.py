import numpy as np
import pytest

from helmscatter import operators
from helmscatter.constants import OperatorKind, NeumannMethod
from helmscatter.exceptions import BindingError, DomainError, ResonanceError, SolverError, \
	OperatorHeaderSignatureMismatchException
from helmscatter.geometry import ShapeMap, Bump, build_surface, build_reference_mesh, apply_shape
from helmscatter.operators import BoundaryField, DenseOperator, AssemblyPlan, Factorization, \
	assemble_V, assemble_W, assemble_Wstar, assemble_lambda, solve_density, direct_flux_solve, dtn_matrix, \
	bound_plan, pin_plan


def test_single_layer_of_one_on_sphere(sphere2):
	V = assemble_V(sphere2, 0.0)
	assert np.max(np.abs(V.matrix @ np.ones(sphere2.n_panels) + 1.0)) < 1e-2


@pytest.mark.parametrize('assemble', [assemble_W, assemble_Wstar])
def test_gauss_identity_sphere(sphere2, assemble):
	op = assemble(sphere2, 0.0)
	assert np.max(np.abs(op.matrix @ np.ones(sphere2.n_panels) - 0.5)) < 1e-2


@pytest.mark.parametrize('name', ['ellipsoid2', 'star2'])
def test_gauss_identity_deformed(request, name):
	surface = request.getfixturevalue(name)
	W = assemble_W(surface, 0.0)
	assert np.max(np.abs(W.matrix @ np.ones(surface.n_panels) - 0.5)) < 2e-2


def test_adjoint_double_layer_is_weighted_transpose(sphere2):
	W = assemble_W(sphere2, 0.0).matrix
	Ws = assemble_Wstar(sphere2, 0.0).matrix
	w = sphere2.weights
	p = sphere2.points
	far = np.linalg.norm(p[:, None, :] - p[None, :, :], axis = -1) > 3.0 * sphere2.max_diameter
	lhs = Ws / w[None, :]
	rhs = W.T / w[:, None]
	assert np.count_nonzero(far) > 0
	assert np.max(np.abs(lhs - rhs)[far]) < 5e-2 * np.max(np.abs(rhs[far]))


def test_constant_density_on_sphere(sphere2):
	op = assemble_lambda(sphere2, 0.0)
	g = BoundaryField.on(sphere2, 1.0)
	theta, diag = solve_density(op, g)
	assert np.max(np.abs(theta.values + 1.0)) < 2e-2
	assert diag.residual <= 1e-10
	assert diag.size == sphere2.n_panels
	assert diag.condition >= 1.0


def test_lambda_is_combination(sphere1):
	k = complex(1.0, 0.5)
	V = assemble_V(sphere1, k)
	W = assemble_W(sphere1, k)
	lam = assemble_lambda(sphere1, k)
	expected = W.matrix + (1.0 - 1j) * V.matrix - 0.5 * np.eye(sphere1.n_panels)
	assert np.allclose(lam.matrix, expected, rtol = 0, atol = 1e-14)
	assert lam.kind == OperatorKind.Lambda


def test_assembly_cached(sphere1):
	assert assemble_V(sphere1, 1.0) is assemble_V(sphere1, 1.0)


def test_assembly_independent_of_threads():
	a = build_surface(ShapeMap.axes_scale(1.0, 1.3, 0.7), 1)
	b = build_surface(ShapeMap.axes_scale(1.0, 1.3, 0.7), 1)
	assert np.array_equal(assemble_W(a, 1.0, threads = 1).matrix, assemble_W(b, 1.0, threads = 3).matrix)


def test_binding(sphere1, sphere2):
	g = BoundaryField.on(sphere2, 1.0)
	op = assemble_lambda(sphere1, 1.0)
	with pytest.raises(BindingError):
		solve_density(op, g)
	with pytest.raises(BindingError):
		BoundaryField.on(sphere1, np.ones(3))
	with pytest.raises(BindingError):
		BoundaryField.on(sphere1, 1.0) + g
	with pytest.raises(BindingError):
		assemble_lambda(sphere1, 2.0, V = assemble_V(sphere1, 1.0))


def test_boundary_field_arithmetic(sphere1):
	a = BoundaryField.on(sphere1, 2.0)
	b = BoundaryField.on(sphere1, 1.0)
	assert np.allclose((a - b).values, 1.0)
	assert np.allclose((3 * b + a).values, 5.0)
	assert a.norm() == pytest.approx(2.0)


def test_plan_binds_across_family():
	mesh = build_reference_mesh(1)
	base = apply_shape(ShapeMap.identity(), mesh)
	plan = AssemblyPlan.build(base)
	assert plan.n_near_pairs > 0
	other = apply_shape(ShapeMap.linear_family(ShapeMap.identity(), ShapeMap.identity(), 0.1), mesh)
	bp = plan.bind(other)
	assert np.allclose(bp.reg_y, 1.1 * bound_plan(base, plan = plan).reg_y)
	V = assemble_V(other, 0.0, plan = bp)
	assert np.max(np.abs(V.matrix @ np.ones(mesh.n_panels) + 1.1)) < 3e-2
	with pytest.raises(BindingError):
		plan.bind(apply_shape(ShapeMap.identity(), mesh.permuted(1)))


def test_pinned_plan_is_reused():
	mesh = build_reference_mesh(1)
	plan = AssemblyPlan.build(apply_shape(ShapeMap.identity(), mesh))
	other = apply_shape(ShapeMap.linear_family(ShapeMap.identity(), ShapeMap.identity(), 0.2), mesh)
	bp = pin_plan(other, plan)
	assert bound_plan(other, plan.rules) is bp
	assert bp.plan is plan


def test_dump_and_load(tmp_path, sphere1):
	V = assemble_V(sphere1, complex(1.0, 0.25))
	path = tmp_path / 'v.hsop'
	V.dump(str(path))
	back = DenseOperator.load(str(path), sphere1.shape_hash)
	assert back.kind == OperatorKind.V
	assert complex(back.k) == complex(1.0, 0.25)
	assert np.array_equal(back.matrix, V.matrix)
	data = V.to_bytes()
	with pytest.raises(DomainError):
		DenseOperator.from_bytes(data[:-8])
	with pytest.raises(OperatorHeaderSignatureMismatchException):
		DenseOperator.from_bytes(b'HSOP0' + data[5:])


def test_singular_factorization(sphere1):
	op = DenseOperator(np.zeros((sphere1.n_panels, sphere1.n_panels), dtype = np.complex128), OperatorKind.custom, 0.0, sphere1.shape_hash)
	with pytest.raises(SolverError):
		Factorization(op)


def test_radial_dtn_direct(sphere2):
	k = 1.0
	g = BoundaryField.on(sphere2, 1.0)
	psi, diag = direct_flux_solve(sphere2, k, g, with_diagnostics = True)
	assert np.max(np.abs(psi.values - (1j - 1.0))) < 1e-1
	assert diag.residual <= 1e-10


def test_resonance_refusal(sphere1, monkeypatch):
	monkeypatch.setattr(operators, 'CONDITION_LIMIT', 1.0)
	g = BoundaryField.on(sphere1, 1.0)
	with pytest.raises(ResonanceError):
		direct_flux_solve(sphere1, 1.0, g)
	psi = direct_flux_solve(sphere1, 1.0, g, force = True)
	assert np.all(np.isfinite(psi.values))


def test_dtn_matrix_matches_trace(sphere1):
	k = complex(1.0, 0.5)
	g = BoundaryField.on(sphere1, np.cos(sphere1.points[:, 2]))
	D = dtn_matrix(sphere1, k, NeumannMethod.DIRECT)
	psi = direct_flux_solve(sphere1, k, g)
	assert np.allclose(D.matrix @ g.values, psi.values, rtol = 0, atol = 1e-8)


@pytest.mark.slow
@pytest.mark.parametrize('shape', [
	ShapeMap.identity(),
	ShapeMap.axes_scale(1.0, 1.3, 0.7),
	ShapeMap.radial_star([Bump((0.0, 0.0, 1.0), 0.5, 0.15)]),
])
def test_gauss_identity_level3(shape):
	surface = build_surface(shape, 3)
	W = assemble_W(surface, 0.0)
	assert np.max(np.abs(W.matrix @ np.ones(surface.n_panels) - 0.5)) <= 5e-3


@pytest.mark.slow
def test_adjoint_gauss_identity_level3():
	surface = build_surface(ShapeMap.identity(), 3)
	Ws = assemble_Wstar(surface, 0.0)
	assert np.max(np.abs(Ws.matrix @ np.ones(surface.n_panels) - 0.5)) <= 5e-3


@pytest.mark.slow
def test_constant_density_converges():
	errors = []
	for level in (2, 3):
		surface = build_surface(ShapeMap.identity(), level)
		theta, _ = solve_density(assemble_lambda(surface, 0.0), BoundaryField.on(surface, 1.0))
		errors.append(np.max(np.abs(theta.values + 1.0)))
	assert errors[1] <= 1e-2
	assert errors[0] / errors[1] >= 1.7

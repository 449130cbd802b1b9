#!/usr/bin/env python3
#
# Batch commands. Each command reads a RunConfig, computes, and writes JSON/CSV
# artifacts into config.out; run() maps exceptions to exit codes.
#

import math
import logging

import numpy as np

from helmscatter.constants import ExitCode, DatumKind, ShapeFamily, SampleGrid, FarFieldRoute
from helmscatter.exceptions import ConfigError, DomainError, ShapeError, BindingError, AssemblyError, \
	SolverError, OracleToleranceError, InvariantViolation
from helmscatter.geometry import build_surface, validate_shape
from helmscatter.operators import assemble_lambda, assemble_W, solve_density, dtn_matrix
from helmscatter.fields import far_field_direct, far_field_sphere_formula, eval_solution, total_field, \
	dtn_apply, sphere_directions, radiation_check
from helmscatter.oracle import DirichletDatum, realize_datum, point_source_exact, radial_sphere_exact, mie_far_field
from helmscatter.sensitivity import family_evaluate, central_difference, chebyshev_analyticity, \
	joint_sweep, mixed_differences, noise_floor
from helmscatter.writer import ArtifactWriter, boundary_csv, family_csv

DEFAULT_SOURCE = (0.2, 0.1, -0.1)
GAUSS_TOLERANCE = 5e-3
MIE_MIN_TERMS = 20

COMMANDS = ('solve', 'farfield', 'dtn', 'field', 'sweep', 'verify', 'convergence', 'export-mesh')


class RunResult:
	def __init__(self, code, artifacts = None, report = None, message = None):
		self.code = ExitCode(code)
		self.artifacts = artifacts or []
		self.report = report
		self.message = message

	def __int__(self):
		return int(self.code)

	def __str__(self):
		t = '== RunResult ==\n'
		t+= 'Code: %s\n' % self.code.name
		if self.message is not None:
			t+= 'Message: %s\n' % self.message
		for path in self.artifacts:
			t+= 'Artifact: %s\n' % path
		return t


def _surface(config, level = None):
	return build_surface(config.shape, config.level if level is None else level)


def _directions(config):
	if isinstance(config.directions, int):
		return sphere_directions(config.directions)
	d = np.asarray(config.directions, dtype = np.float64)
	return d / np.linalg.norm(d, axis = -1, keepdims = True)


def _solve(config, surface, threads, datum = None):
	g = realize_datum(datum or config.datum, surface, config.k)
	op = assemble_lambda(surface, config.k, config.rules, threads)
	theta, diag = solve_density(op, g)
	return g, theta, diag


def cmd_solve(config, writer, threads):
	surface = _surface(config)
	g, theta, diag = _solve(config, surface, threads)
	writer.csv('theta.csv', boundary_csv(surface, theta.values))
	return writer.json('solve.json', {
		'n_panels' : surface.n_panels,
		'area' : surface.area(),
		'surface' : surface.shape_hash,
		'diagnostics' : diag.to_dict(),
		'theta' : theta.values,
	})


def _exact_far_field(config, surface, directions):
	"""Closed-form far field of the configured case, or None"""
	datum = config.datum
	kv = complex(config.k)
	if datum.kind == DatumKind.POINT_SOURCE:
		return point_source_exact(datum.source, config.k).far_field(directions), FarFieldRoute.EXACT
	if config.shape.family == ShapeFamily.IDENTITY and datum.kind == DatumKind.PLANE_WAVE and kv.imag == 0 and kv.real > 0:
		L = max(MIE_MIN_TERMS, math.ceil(kv.real) + 10)
		return mie_far_field(kv.real, datum.direction, L, directions).values, FarFieldRoute.MIE
	if config.shape.family in (ShapeFamily.IDENTITY, ShapeFamily.UNIFORM_SCALE) and datum.kind == DatumKind.CONSTANT:
		rho = 1.0 if config.shape.params is None else config.shape.params[0]
		return datum.value * radial_sphere_exact(rho, config.k).far_field(directions), FarFieldRoute.EXACT
	return None, None


def cmd_farfield(config, writer, threads):
	surface = _surface(config)
	g, theta, diag = _solve(config, surface, threads)
	directions = _directions(config)
	direct = far_field_direct(surface, config.k, theta, directions, config.rules)
	sphere = far_field_sphere_formula(surface, config.k, theta, config.radius, directions, config.rules, threads)
	report = {
		'direct' : direct.to_dict(),
		'sphere_formula' : sphere.to_dict(),
		'agreement' : direct.relative_error(sphere),
		'diagnostics' : diag.to_dict(),
	}
	exact, route = _exact_far_field(config, surface, directions)
	if exact is not None:
		report['reference_route'] = route.value
		report['error_direct'] = direct.relative_error(exact)
		report['error_sphere_formula'] = sphere.relative_error(exact)
	writer.csv('farfield_direct.csv', direct.to_csv())
	writer.csv('farfield_sphere.csv', sphere.to_csv())
	return writer.json('farfield.json', report)


def cmd_dtn(config, writer, threads):
	surface = _surface(config)
	g = realize_datum(config.datum, surface, config.k)
	trace = dtn_apply(surface, config.k, g, config.neumann, config.rules, threads)
	writer.csv('dtn.csv', boundary_csv(surface, trace.values))
	report = {
		'method' : config.neumann.value,
		'n_panels' : surface.n_panels,
		'trace' : trace.values,
	}
	if trace.flags is not None:
		report['diverging'] = int(np.count_nonzero(trace.flags))
	if config.dtn_matrix:
		op = dtn_matrix(surface, config.k, config.neumann, config.rules, threads)
		writer.operator('dtn_matrix.hsop', op)
		report['matrix_consistency'] = float(np.max(np.abs(op.matrix @ g.values - trace.values)))
	return writer.json('dtn.json', report)


def cmd_field(config, writer, threads):
	surface = _surface(config)
	g, theta, diag = _solve(config, surface, threads)
	points = np.asarray(config.points, dtype = np.float64).reshape(-1, 3)
	u = eval_solution(surface, config.k, theta, points, config.rules, threads)
	records = [{'point' : p.tolist(), 'scattered' : v} for p, v in zip(points, u)]
	if config.datum.kind == DatumKind.PLANE_WAVE:
		total = total_field(surface, config.k, theta, points, config.datum.direction, config.rules, threads)
		for r, v in zip(records, total):
			r['total'] = v
	return writer.json('field.json', {'records' : records, 'diagnostics' : diag.to_dict()})


def _family_report(config, writer, threads):
	family = config.family_spec()
	obs = config.observable(config.family)
	records = family_evaluate(family, obs, config.rules, threads)
	writer.csv('sweep.csv', family_csv(records))
	t = np.array([r[0] for r in records])
	values = np.array([r[1] for r in records])
	report = {
		'family' : family.to_dict(),
		'observable' : obs.to_dict(),
		'records' : [{'t' : a, 're' : b.real, 'im' : b.imag} for a, b in records],
	}
	noise = 0.0
	seeds = config.family.get('noise_seeds', [])
	if len(seeds) > 0:
		noise = noise_floor(family, obs, seeds = seeds, rules = config.rules)
		report['noise_floor'] = noise
	if family.grid == SampleGrid.CHEBYSHEV and len(values) >= 16:
		report['chebyshev'] = chebyshev_analyticity(values, noise).to_dict()
	elif family.grid == SampleGrid.UNIFORM and len(values) >= 3:
		order = int(config.family.get('order', 4 if len(values) >= 5 else 2))
		report['derivative'] = central_difference(t, values, order).to_dict()
	return report


def _joint_report(config, writer, threads):
	spec = config.sweep_spec()
	obs = config.observable(config.sweep)
	table = joint_sweep(spec, obs, config.rules, config.strict)
	writer.csv('joint_sweep.csv', table.to_csv())
	report = {'sweep' : spec.to_dict(), 'observable' : obs.to_dict(), 'table' : table.to_dict()}
	if table.values.shape[0] > 1 and table.values.shape[1] > 1:
		a, b = mixed_differences(table.values)
		report['mixed_difference_gap'] = float(np.nanmax(np.abs(a - b)))
	return report


def cmd_sweep(config, writer, threads):
	if config.family is None and config.sweep is None:
		raise ConfigError('The sweep command needs a family or a sweep block')
	report = {}
	if config.family is not None:
		report['family'] = _family_report(config, writer, threads)
	if config.sweep is not None:
		report['joint'] = _joint_report(config, writer, threads)
	return writer.json('sweep.json', report)


def _source(config):
	if config.datum.kind == DatumKind.POINT_SOURCE:
		return config.datum.source
	return np.asarray(DEFAULT_SOURCE)


def _point_source_error(config, level, threads, directions):
	surface = _surface(config, level)
	z = _source(config)
	datum = DirichletDatum.point_source(z)
	g, theta, diag = _solve(config, surface, threads, datum)
	ff = far_field_direct(surface, config.k, theta, directions, config.rules)
	exact = point_source_exact(z, config.k).far_field(directions)
	return surface, theta, diag, ff.relative_error(exact)


def cmd_verify(config, writer, threads):
	directions = _directions(config)
	checks = []
	surface, theta, diag, err = _point_source_error(config, config.level, threads, directions)
	checks.append({'name' : 'point_source_farfield', 'error' : err, 'tolerance' : config.tolerance, 'residual' : diag.residual})

	W = assemble_W(surface, 0.0, config.rules, threads)
	gauss = float(np.max(np.abs(W.matrix @ np.ones(surface.n_panels) - 0.5)))
	checks.append({'name' : 'gauss_identity', 'error' : gauss, 'tolerance' : max(GAUSS_TOLERANCE, config.tolerance)})

	rows = radiation_check(surface, config.k, theta, directions[0], [20.0, 40.0], config.rules)
	if complex(config.k) != 0:
		ratio = rows[1]['residual'] / rows[0]['residual'] if rows[0]['residual'] > 0 else 0.0
		checks.append({'name' : 'radiation_decay', 'error' : ratio, 'tolerance' : 0.55})

	kv = complex(config.k)
	if config.shape.family == ShapeFamily.IDENTITY and kv.imag == 0 and kv.real > 0:
		d = np.array([0.0, 0.0, 1.0])
		sphere = _surface(config)
		g = realize_datum(DirichletDatum.plane_wave(d), sphere, config.k)
		th, _ = solve_density(assemble_lambda(sphere, config.k, config.rules, threads), g)
		bem = far_field_direct(sphere, config.k, th, directions, config.rules)
		mie = mie_far_field(kv.real, d, max(MIE_MIN_TERMS, math.ceil(kv.real) + 10), directions)
		checks.append({'name' : 'mie_farfield', 'error' : bem.relative_error(mie), 'tolerance' : max(2e-2, config.tolerance)})

	for c in checks:
		c['passed'] = bool(c['error'] <= c['tolerance'])
		logging.info('verify %s: error %.3e (tolerance %.1e) %s' % (c['name'], c['error'], c['tolerance'], 'ok' if c['passed'] else 'FAILED'))
	doc = writer.json('verify.json', {'level' : config.level, 'checks' : checks})
	failed = [c['name'] for c in checks if not c['passed']]
	if len(failed) > 0:
		raise OracleToleranceError('Checks outside tolerance: %s' % ', '.join(failed))
	return doc


def cmd_convergence(config, writer, threads):
	directions = _directions(config)
	rows = []
	for level in config.levels:
		surface, theta, diag, err = _point_source_error(config, level, threads, directions)
		row = {'level' : level, 'n_panels' : surface.n_panels, 'error' : err, 'residual' : diag.residual}
		if len(rows) > 0 and err > 0:
			row['ratio'] = rows[-1]['error'] / err
			row['observed_order'] = math.log2(row['ratio'])
		rows.append(row)
	return writer.json('convergence.json', {'ladder' : rows})


def cmd_export_mesh(config, writer, threads):
	surface = build_surface(config.shape, config.level, seed = config.seed or None, check = False)
	mesh = surface.mesh
	diag = validate_shape(config.shape, mesh)
	writer.text('mesh.obj', surface.to_obj())
	return writer.json('mesh.json', {
		'n_panels' : surface.n_panels,
		'n_nodes' : len(surface.mesh.nodes),
		'area' : surface.area(),
		'max_diameter' : surface.max_diameter,
		'validation' : diag.to_dict(),
		'edge_check' : mesh.edge_check(),
	})


HANDLERS = {
	'solve' : cmd_solve,
	'farfield' : cmd_farfield,
	'dtn' : cmd_dtn,
	'field' : cmd_field,
	'sweep' : cmd_sweep,
	'verify' : cmd_verify,
	'convergence' : cmd_convergence,
	'export-mesh' : cmd_export_mesh,
}

EXIT_CODES = (
	((ConfigError, DomainError, ShapeError, BindingError), ExitCode.CONFIG_ERROR),
	((SolverError, AssemblyError), ExitCode.SOLVER_ERROR),
	((OracleToleranceError,), ExitCode.ORACLE_FAILURE),
	((InvariantViolation,), ExitCode.INTERNAL_ERROR),
)


def exit_code(exc):
	for classes, code in EXIT_CODES:
		if isinstance(exc, classes):
			return code
	return ExitCode.INTERNAL_ERROR


def run(command, config):
	"""Runs one command; expected errors are logged, never raised"""
	if command not in HANDLERS:
		logging.error('Unknown command %r, expected one of %s' % (command, ', '.join(COMMANDS)))
		return RunResult(ExitCode.CONFIG_ERROR, message = 'unknown command %s' % command)
	writer = ArtifactWriter(config.out, command, config)
	try:
		threads = config.thread_count()
		doc = HANDLERS[command](config, writer, threads)
	except Exception as e:
		code = exit_code(e)
		if code == ExitCode.INTERNAL_ERROR and not isinstance(e, InvariantViolation):
			logging.exception('Internal error in %s' % command)
		else:
			logging.error('%s failed: %s' % (command, e))
		return RunResult(code, writer.written, message = str(e))
	return RunResult(ExitCode.SUCCESS, writer.written, report = doc)

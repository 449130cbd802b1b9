import os

import numpy as np
import pytest

from helmscatter import cli
from helmscatter.__main__ import run as main
from helmscatter.config import RunConfig
from helmscatter.constants import ExitCode
from helmscatter.exceptions import ConfigError, DomainError, MeshLevelError, ResonanceError, \
	OracleToleranceError, InvariantViolation, AssemblyError
from helmscatter.operators import DenseOperator
from helmscatter.writer import ArtifactWriter, read_artifact, payload_digest


def config(tmp_path, **kw):
	d = {'level' : 1, 'directions' : 12}
	d.update(kw)
	cfg = RunConfig.parse(d)
	cfg.out = str(tmp_path)
	return cfg


def test_solve_writes_artifacts(tmp_path):
	result = cli.run('solve', config(tmp_path))
	assert result.code == ExitCode.SUCCESS
	doc = read_artifact(os.path.join(str(tmp_path), 'solve.json'))
	assert doc['command'] == 'solve'
	assert doc['digest'] == payload_digest(doc['payload'])
	assert doc['payload']['n_panels'] == 80
	with open(os.path.join(str(tmp_path), 'theta.csv')) as f:
		lines = f.read().splitlines()
	assert lines[0].startswith('# config: ')
	assert lines[2] == 'panel,x,y,z,re,im'
	assert len(lines) == 3 + 80


def test_thread_count_does_not_change_output(tmp_path):
	a = cli.run('solve', config(tmp_path / 'a', threads = 1))
	b = cli.run('solve', config(tmp_path / 'b', threads = 2))
	assert a.report['digest'] == b.report['digest']
	assert a.report['config_digest'] == b.report['config_digest']


def test_main_rejects_lower_half_plane(tmp_path, capsys):
	code = main(['solve', '--k', '1,-0.5', '--out', str(tmp_path)])
	assert code == ExitCode.CONFIG_ERROR
	assert not os.path.exists(os.path.join(str(tmp_path), 'solve.json'))


def test_main_runs_command(tmp_path, capsys):
	code = main(['export-mesh', '--level', '1', '--shape', 'axes:1,1.2,0.8', '--out', str(tmp_path)])
	assert code == 0
	assert 'mesh.obj' in capsys.readouterr().out


def test_main_config_file(tmp_path, capsys):
	path = tmp_path / 'run.json'
	path.write_text('{"level": 1, "unknown": 1}')
	assert main(['solve', '--config', str(path), '--out', str(tmp_path)]) == ExitCode.CONFIG_ERROR


def test_unknown_command(tmp_path):
	assert cli.run('plot', config(tmp_path)).code == ExitCode.CONFIG_ERROR


def test_farfield_radius_too_small(tmp_path):
	result = cli.run('farfield', config(tmp_path, radius = 0.5))
	assert result.code == ExitCode.CONFIG_ERROR
	assert 'large enough' in result.message


def test_farfield_reports(tmp_path):
	result = cli.run('farfield', config(tmp_path, datum = 'point:0.2,0.1,-0.1', radius = 3.0))
	assert result.code == ExitCode.SUCCESS
	payload = result.report['payload']
	assert payload['reference_route'] == 'exact'
	assert payload['agreement'] < 1e-2
	assert len(payload['direct']['records']) == 12


def test_point_source_outside(tmp_path):
	result = cli.run('solve', config(tmp_path, datum = 'point:2,0,0'))
	assert result.code == ExitCode.CONFIG_ERROR
	assert 'outside' in result.message


def test_dtn_matrix(tmp_path):
	result = cli.run('dtn', config(tmp_path, dtn_matrix = True))
	assert result.code == ExitCode.SUCCESS
	assert result.report['payload']['matrix_consistency'] < 1e-8
	assert os.path.exists(os.path.join(str(tmp_path), 'dtn_matrix.hsop'))
	op = DenseOperator.load(os.path.join(str(tmp_path), 'dtn_matrix.hsop'))
	assert op.matrix.shape == (80, 80)


def test_field_plane_wave(tmp_path):
	result = cli.run('field', config(tmp_path, datum = 'plane:0,0,1', points = [[0, 0, 2], [3, 0, 0]]))
	assert result.code == ExitCode.SUCCESS
	records = result.report['payload']['records']
	assert len(records) == 2
	assert 'total' in records[0]


def test_field_inside_is_rejected(tmp_path):
	result = cli.run('field', config(tmp_path, points = [[0, 0, 0]]))
	assert result.code == ExitCode.CONFIG_ERROR


def test_sweep_family(tmp_path):
	family = {'kind' : 'shape', 'direction' : 'identity', 'range' : [0.0, 0.2], 'n' : 5}
	result = cli.run('sweep', config(tmp_path, family = family))
	assert result.code == ExitCode.SUCCESS
	report = result.report['payload']['family']
	assert report['derivative']['order'] == 4
	assert len(report['records']) == 5
	assert os.path.exists(os.path.join(str(tmp_path), 'sweep.csv'))


def test_sweep_joint(tmp_path):
	sweep = {'t' : [0.0, 0.1], 'k' : [0.5, 1.0], 'a' : [0.0]}
	result = cli.run('sweep', config(tmp_path, sweep = sweep))
	assert result.code == ExitCode.SUCCESS
	assert result.report['payload']['joint']['mixed_difference_gap'] < 1e-12


def test_sweep_needs_block(tmp_path):
	assert cli.run('sweep', config(tmp_path)).code == ExitCode.CONFIG_ERROR


def test_verify_passes(tmp_path):
	result = cli.run('verify', config(tmp_path, level = 2, tolerance = 0.2))
	assert result.code == ExitCode.SUCCESS
	names = [c['name'] for c in result.report['payload']['checks']]
	assert names == ['point_source_farfield', 'gauss_identity', 'radiation_decay', 'mie_farfield']


@pytest.mark.slow
def test_verify_acceptance(tmp_path):
	result = cli.run('verify', config(tmp_path, level = 3, tolerance = 1e-2))
	assert result.code == ExitCode.SUCCESS
	checks = {c['name'] : c for c in result.report['payload']['checks']}
	assert checks['point_source_farfield']['error'] <= 1e-2
	assert checks['gauss_identity']['error'] <= 5e-3


def test_verify_failure_still_writes(tmp_path):
	result = cli.run('verify', config(tmp_path, tolerance = 1e-12))
	assert result.code == ExitCode.ORACLE_FAILURE
	doc = read_artifact(os.path.join(str(tmp_path), 'verify.json'))
	assert not all(c['passed'] for c in doc['payload']['checks'])


def test_convergence(tmp_path):
	result = cli.run('convergence', config(tmp_path, levels = [1, 2]))
	assert result.code == ExitCode.SUCCESS
	ladder = result.report['payload']['ladder']
	assert ladder[1]['ratio'] > 1.0


def test_export_mesh(tmp_path):
	result = cli.run('export-mesh', config(tmp_path, seed = 4))
	assert result.code == ExitCode.SUCCESS
	payload = result.report['payload']
	assert payload['n_panels'] == 80
	assert payload['edge_check']
	with open(os.path.join(str(tmp_path), 'mesh.obj')) as f:
		faces = [l for l in f if l.startswith('f ')]
	assert len(faces) == 80


def test_exit_codes():
	assert cli.exit_code(ConfigError('x')) == ExitCode.CONFIG_ERROR
	assert cli.exit_code(MeshLevelError('x')) == ExitCode.CONFIG_ERROR
	assert cli.exit_code(DomainError('x')) == ExitCode.CONFIG_ERROR
	assert cli.exit_code(ResonanceError('x')) == ExitCode.SOLVER_ERROR
	assert cli.exit_code(AssemblyError('x')) == ExitCode.SOLVER_ERROR
	assert cli.exit_code(OracleToleranceError('x')) == ExitCode.ORACLE_FAILURE
	assert cli.exit_code(InvariantViolation('x')) == ExitCode.INTERNAL_ERROR
	assert cli.exit_code(ZeroDivisionError()) == ExitCode.INTERNAL_ERROR


def test_unexpected_error_is_internal(tmp_path, monkeypatch):
	def boom(config, writer, threads):
		raise np.linalg.LinAlgError('boom')
	monkeypatch.setitem(cli.HANDLERS, 'solve', boom)
	result = cli.run('solve', config(tmp_path))
	assert result.code == ExitCode.INTERNAL_ERROR


def test_writer_paths(tmp_path):
	cfg = config(tmp_path)
	writer = ArtifactWriter(str(tmp_path / 'nested'), 'dtn', cfg)
	path = writer.path('a.csv')
	assert path == os.path.join(str(tmp_path / 'nested'), 'a.csv')
	assert os.path.isdir(str(tmp_path / 'nested'))
	assert writer.written == []

#!/usr/bin/env python3
#
# Run configuration: one JSON document, scalar fields overridable from flags.
#

import os
import json
import hashlib

from helmscatter.constants import NeumannMethod, SampleGrid, THREADS_ENV
from helmscatter.exceptions import ConfigError, HelmScatterException
from helmscatter.geometry import ShapeMap, Bump
from helmscatter.kernels import WaveNumber
from helmscatter.oracle import DirichletDatum
from helmscatter.quadrature import RuleSet
from helmscatter.sensitivity import FamilySpec, ObservableSpec, JointSweepSpec


def parse_shape(token):
	"""identity | scale:a | axes:a,b,c | star:cx,cy,cz,width,amp[;cx,cy,cz,width,amp...]"""
	if isinstance(token, dict):
		return ShapeMap.from_dict(token)
	name, _, params = str(token).partition(':')
	try:
		if name == 'identity' and params == '':
			return ShapeMap.identity()
		if name == 'scale':
			return ShapeMap.uniform_scale(float(params))
		if name == 'axes':
			a, b, c = [float(x) for x in params.split(',')]
			return ShapeMap.axes_scale(a, b, c)
		if name == 'star':
			bumps = []
			for part in params.split(';'):
				cx, cy, cz, width, amp = [float(x) for x in part.split(',')]
				bumps.append(Bump((cx, cy, cz), width, amp))
			return ShapeMap.radial_star(bumps)
	except ValueError as e:
		raise ConfigError('Cannot parse shape %r: %s' % (token, e)) from e
	raise ConfigError('Unknown shape %r' % (token,))


def parse_datum(token):
	if isinstance(token, dict):
		return DirichletDatum.from_dict(token)
	return DirichletDatum.parse(token)


def parse_wavenumber(value):
	if isinstance(value, (list, tuple)):
		if len(value) != 2:
			raise ConfigError('Wave number must be [re, im], got %r' % (value,))
		return WaveNumber(complex(float(value[0]), float(value[1])))
	if isinstance(value, str):
		try:
			return WaveNumber.parse(value)
		except ValueError as e:
			raise ConfigError('Cannot parse wave number %r' % (value,)) from e
	return WaveNumber(complex(value))


def parse_observable(d):
	if d is None:
		return ObservableSpec.farfield_at((1.0, 0.0, 0.0))
	kind = d.get('kind')
	try:
		if kind == 'farfield_at':
			return ObservableSpec.farfield_at(d['direction'])
		if kind == 'field_at':
			return ObservableSpec.field_at(d['point'])
		if kind == 'dtn_entry':
			return ObservableSpec.dtn_entry(d['index'])
	except (KeyError, ValueError, TypeError) as e:
		raise ConfigError('Invalid observable %r: %s' % (d, e)) from e
	if kind == 'density_norm':
		return ObservableSpec.density_norm()
	raise ConfigError('Unknown observable %r' % (kind,))


class RunConfig:
	KEYS = (
		'level', 'shape', 'k', 'datum', 'seed', 'rules', 'points', 'directions',
		'radius', 'neumann', 'dtn_matrix', 'family', 'sweep', 'tolerance', 'levels',
		'strict', 'threads', 'out',
	)

	def __init__(self):
		self.level = 2
		self.shape = ShapeMap.identity()
		self.k = WaveNumber(1.0)
		self.datum = DirichletDatum.constant(1.0)
		self.seed = 0
		self.rules = RuleSet()
		self.points = [[2.0, 0.0, 0.0]]
		self.directions = 50
		self.radius = 2.0
		self.neumann = NeumannMethod.DIRECT
		self.dtn_matrix = False
		self.family = None
		self.sweep = None
		self.tolerance = 1e-2
		self.levels = [1, 2]
		self.strict = False
		self.threads = None
		self.out = '.'

	@staticmethod
	def parse(d):
		if not isinstance(d, dict):
			raise ConfigError('Configuration must be a JSON object')
		unknown = sorted(set(d) - set(RunConfig.KEYS))
		if len(unknown) > 0:
			raise ConfigError('Unknown configuration keys: %s' % ', '.join(unknown))
		cfg = RunConfig()
		try:
			if 'level' in d:
				cfg.level = int(d['level'])
			if 'shape' in d:
				cfg.shape = parse_shape(d['shape'])
			if 'k' in d:
				cfg.k = parse_wavenumber(d['k'])
			if 'datum' in d:
				cfg.datum = parse_datum(d['datum'])
			if 'seed' in d:
				cfg.seed = int(d['seed'])
			if 'rules' in d:
				cfg.rules = RuleSet.parse(d['rules'])
			if 'points' in d:
				cfg.points = [[float(x) for x in p] for p in d['points']]
			if 'directions' in d:
				dirs = d['directions']
				cfg.directions = int(dirs) if isinstance(dirs, (int, float)) else [[float(x) for x in p] for p in dirs]
			if 'radius' in d:
				cfg.radius = float(d['radius'])
			if 'neumann' in d:
				cfg.neumann = NeumannMethod(d['neumann'])
			if 'dtn_matrix' in d:
				cfg.dtn_matrix = bool(d['dtn_matrix'])
			if 'family' in d:
				cfg.family = dict(d['family']) if d['family'] is not None else None
			if 'sweep' in d:
				cfg.sweep = dict(d['sweep']) if d['sweep'] is not None else None
			if 'tolerance' in d:
				cfg.tolerance = float(d['tolerance'])
			if 'levels' in d:
				cfg.levels = [int(x) for x in d['levels']]
			if 'strict' in d:
				cfg.strict = bool(d['strict'])
			if 'threads' in d:
				cfg.threads = int(d['threads'])
			if 'out' in d:
				cfg.out = str(d['out'])
		except ConfigError:
			raise
		except (HelmScatterException, ValueError, TypeError, KeyError) as e:
			raise ConfigError('Invalid configuration: %s' % e) from e
		cfg.validate()
		return cfg

	@staticmethod
	def from_file(path):
		if not os.path.isfile(path):
			raise ConfigError('Configuration file %s does not exist' % path)
		with open(path, 'r') as f:
			try:
				d = json.load(f)
			except json.JSONDecodeError as e:
				raise ConfigError('Configuration file %s is not valid JSON: %s' % (path, e)) from e
		return RunConfig.parse(d)

	def override(self, level = None, k = None, shape = None, datum = None, out = None, threads = None, strict = None):
		"""Flag values take precedence over the file"""
		try:
			if level is not None:
				self.level = int(level)
			if k is not None:
				self.k = parse_wavenumber(k)
			if shape is not None:
				self.shape = parse_shape(shape)
			if datum is not None:
				self.datum = parse_datum(datum)
		except ConfigError:
			raise
		except (HelmScatterException, ValueError) as e:
			raise ConfigError('Invalid flag value: %s' % e) from e
		if out is not None:
			self.out = out
		if threads is not None:
			self.threads = int(threads)
		if strict:
			self.strict = True
		self.validate()
		return self

	def validate(self):
		if self.level < 0:
			raise ConfigError('Mesh level must be nonnegative, got %s' % self.level)
		if self.threads is not None and self.threads < 1:
			raise ConfigError('Thread count must be positive, got %s' % self.threads)
		if not self.tolerance > 0:
			raise ConfigError('Tolerance must be positive, got %s' % self.tolerance)
		if self.family is not None and 'range' not in self.family:
			raise ConfigError('Family block needs a range [t_min, t_max]')

	def thread_count(self):
		"""--threads (or the file value), then HELM_SCATTER_THREADS, then 1"""
		if self.threads is not None:
			return self.threads
		env = os.environ.get(THREADS_ENV)
		if env is not None and env.strip() != '':
			try:
				n = int(env)
			except ValueError as e:
				raise ConfigError('%s must be an integer, got %r' % (THREADS_ENV, env)) from e
			if n < 1:
				raise ConfigError('%s must be positive, got %s' % (THREADS_ENV, n))
			return n
		return 1

	def family_spec(self):
		"""FamilySpec of the family block"""
		f = self.family
		if f is None:
			raise ConfigError('The sweep command needs a family or a sweep block')
		kind = f.get('kind', 'shape')
		try:
			t_min, t_max = [float(x) for x in f['range']]
			n = int(f.get('n', 5))
			grid = SampleGrid(f.get('grid', 'uniform'))
			if kind == 'shape':
				base = parse_shape(f.get('base', self.shape.to_dict()))
				direction = parse_shape(f.get('direction', 'identity'))
				return FamilySpec.shape(base, direction, t_min, t_max, n, self.level, self.k, self.datum, grid)
			if kind == 'wavenumber':
				dk = complex(*[float(x) for x in f.get('dk', [1.0, 0.0])])
				return FamilySpec.wavenumber(self.k, dk, t_min, t_max, n, self.level, self.shape, self.datum, grid)
			if kind == 'datum':
				direction = parse_datum(f.get('direction', 'constant:1'))
				return FamilySpec.datum_family(self.datum, direction, t_min, t_max, n, self.level, self.k, self.shape, grid)
		except (HelmScatterException, ValueError, TypeError) as e:
			raise ConfigError('Invalid family block: %s' % e) from e
		raise ConfigError('Unknown family kind %r' % (kind,))

	def sweep_spec(self):
		s = self.sweep
		spec = JointSweepSpec()
		try:
			spec.level = self.level
			spec.base_shape = parse_shape(s.get('base', self.shape.to_dict()))
			spec.shape_direction = parse_shape(s.get('direction', 'identity'))
			spec.t_values = [float(x) for x in s.get('t', [0.0])]
			spec.k_values = [float(x) for x in s.get('k', [self.k.real])]
			spec.k_imag = float(s.get('k_imag', self.k.imag))
			spec.datum = self.datum
			spec.datum_direction = parse_datum(s.get('datum_direction', 'constant:1'))
			spec.a_values = [float(x) for x in s.get('a', [0.0])]
		except (HelmScatterException, ValueError, TypeError) as e:
			raise ConfigError('Invalid sweep block: %s' % e) from e
		return spec

	def observable(self, block):
		return parse_observable(block.get('observable'))

	def to_dict(self):
		"""Canonical form; thread count and output path do not enter it"""
		return {
			'level' : self.level,
			'shape' : self.shape.to_dict(),
			'k' : [self.k.real, self.k.imag],
			'datum' : self.datum.to_dict(),
			'seed' : self.seed,
			'rules' : self.rules.to_dict(),
			'points' : self.points,
			'directions' : self.directions,
			'radius' : self.radius,
			'neumann' : self.neumann.value,
			'dtn_matrix' : self.dtn_matrix,
			'family' : self.family,
			'sweep' : self.sweep,
			'tolerance' : self.tolerance,
			'levels' : self.levels,
			'strict' : self.strict,
		}

	def canonical(self):
		return json.dumps(self.to_dict(), sort_keys = True)

	def digest(self):
		return hashlib.sha256(self.canonical().encode()).hexdigest()

	def __str__(self):
		t = '== RunConfig ==\n'
		for k, v in sorted(self.to_dict().items()):
			t += '%s: %s\n' % (k, v)
		return t

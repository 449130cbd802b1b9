import enum
import math

MAX_MESH_LEVEL = 6
JACOBIAN_FLOOR = 1e-10
INJECTIVITY_FACTOR = 0.1

DEFAULT_ETA = 2.0
MAX_SPLIT_DEPTH = 4
REGULAR_ORDERS = (1, 3, 6, 12)
DEFAULT_REGULAR_ORDER = 6
DEFAULT_DUFFY_ORDER = 8

RESIDUAL_TOLERANCE = 1e-8
CONDITION_LIMIT = 1e10

OPERATOR_MAGIC = 'HSOP1'
THREADS_ENV = 'HELM_SCATTER_THREADS'

FOUR_PI = 4.0 * math.pi


class ShapeFamily(enum.Enum):
	IDENTITY		= 'identity'
	UNIFORM_SCALE	= 'uniform_scale'
	AXES_SCALE		= 'axes_scale'
	RADIAL_STAR		= 'radial_star'
	LINEAR_FAMILY	= 'linear_family'


class OperatorKind(enum.Enum):
	V		= 1
	W		= 2
	Wstar	= 3
	Lambda	= 4
	custom	= 5


class DatumKind(enum.Enum):
	CONSTANT		= 'constant'
	POINT_SOURCE	= 'point_source'
	PLANE_WAVE		= 'plane_wave'
	CUSTOM			= 'custom'


class NeumannMethod(enum.Enum):
	DENSITY_FORMULA	= 'paper_formula'
	DIRECT			= 'direct'


class FarFieldRoute(enum.Enum):
	DIRECT			= 'direct'
	SPHERE_FORMULA	= 'sphere_formula'
	MIE				= 'mie'
	EXACT			= 'exact'


class FamilyKind(enum.Enum):
	SHAPE		= 'shape'
	WAVENUMBER	= 'wavenumber'
	DATUM		= 'datum'


class SampleGrid(enum.Enum):
	UNIFORM		= 'uniform'
	CHEBYSHEV	= 'chebyshev'


class ObservableKind(enum.Enum):
	FARFIELD_AT		= 'farfield_at'
	FIELD_AT		= 'field_at'
	DTN_ENTRY		= 'dtn_entry'
	DENSITY_NORM	= 'density_norm'


class ExitCode(enum.IntEnum):
	SUCCESS			= 0
	CONFIG_ERROR	= 2
	SOLVER_ERROR	= 3
	ORACLE_FAILURE	= 4
	INTERNAL_ERROR	= 5

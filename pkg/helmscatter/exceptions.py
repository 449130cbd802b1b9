class HelmScatterException(Exception):
	"""Generic Exception from helmscatter module"""
	pass

class ConfigError(HelmScatterException):
	"""Run configuration is not valid"""
	pass

class DomainError(HelmScatterException, ValueError):
	"""Argument outside the domain of the operation"""
	pass

class MeshLevelError(DomainError):
	"""Requested subdivision level exceeds the memory guard"""
	pass

class ShapeError(HelmScatterException):
	"""Shape map is not an admissible diffeomorphism"""
	pass

class BindingError(HelmScatterException):
	"""Field or operator used with a surface it was not built on"""
	pass

class AssemblyError(HelmScatterException):
	"""Assembled matrix has a non-finite entry"""
	def __init__(self, msg, row = None, col = None):
		HelmScatterException.__init__(self, msg)
		self.row = row
		self.col = col

class SolverError(HelmScatterException):
	"""Dense solve failed its residual or factorization contract"""
	def __init__(self, msg, condition = None):
		HelmScatterException.__init__(self, msg)
		self.condition = condition

class ResonanceError(SolverError):
	"""Single layer operator is too close to an interior Dirichlet eigenvalue"""
	pass

class OracleToleranceError(HelmScatterException):
	"""Verification result outside its acceptance tolerance"""
	pass

class InvariantViolation(HelmScatterException):
	"""Internal invariant did not hold"""
	pass

class OperatorHeaderSignatureMismatchException(HelmScatterException):
	"""Operator dump signature was not correct"""
	pass

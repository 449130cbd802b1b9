name = "helmscatter"
__version__ = "0.1.0"
__banner__ = \
"""
# helmscatter %s
# Exterior Dirichlet Helmholtz solver on perturbed spheres
""" % __version__

from setuptools import setup, find_packages
import re

VERSIONFILE="helmscatter/_version.py"
verstrline = open(VERSIONFILE, "rt").read()
VSRE = r"^__version__ = ['\"]([^'\"]*)['\"]"
mo = re.search(VSRE, verstrline, re.M)
if mo:
    verstr = mo.group(1)
else:
    raise RuntimeError("Unable to find version string in %s." % (VERSIONFILE,))

setup(
	# Application name:
	name="helmscatter",

	# Version number (initial):
	version=verstr,

	# Packages
	packages=find_packages(exclude=["tests"]),

	# Include additional files into the package
	include_package_data=True,

	zip_safe = False,
	description="Boundary element solver for exterior Dirichlet Helmholtz problems on perturbed spheres",
	long_description="Boundary element solver for exterior Dirichlet Helmholtz problems on perturbed spheres, with far field, Dirichlet-to-Neumann and shape/wave number sensitivity tools",

	python_requires='>=3.8',
	install_requires=[
		'numpy>=1.20',
		'scipy>=1.6',
	],
	extras_require={
		'test': ['pytest>=7'],
	},
	classifiers=(
		"Programming Language :: Python :: 3.8",
		"License :: OSI Approved :: MIT License",
		"Operating System :: OS Independent",
	),
	entry_points={
		'console_scripts': [
			'helmscatter = helmscatter.__main__:run',
		],
	}
)

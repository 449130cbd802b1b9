import pytest

from helmscatter.geometry import ShapeMap, Bump, build_surface


def pytest_configure(config):
	config.addinivalue_line('markers', 'slow: level-3 acceptance runs')


@pytest.fixture(scope = 'session')
def sphere1():
	return build_surface(ShapeMap.identity(), 1)


@pytest.fixture(scope = 'session')
def sphere2():
	return build_surface(ShapeMap.identity(), 2)


@pytest.fixture(scope = 'session')
def ellipsoid2():
	return build_surface(ShapeMap.axes_scale(1.0, 1.3, 0.7), 2)


@pytest.fixture(scope = 'session')
def star2():
	return build_surface(ShapeMap.radial_star([Bump((0.0, 0.0, 1.0), 0.5, 0.15)]), 2)

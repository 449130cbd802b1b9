#!/usr/bin/env python3
#
# Command line front end.
#

import sys
import logging

from helmscatter.config import RunConfig
from helmscatter.cli import run as run_command, COMMANDS
from helmscatter.constants import ExitCode
from helmscatter.exceptions import ConfigError
from helmscatter._version import __banner__


def run(argv = None):
	import argparse

	parser = argparse.ArgumentParser(description='Exterior Dirichlet Helmholtz scattering on perturbed spheres')
	parser.add_argument('command', choices = COMMANDS, help='what to compute')
	parser.add_argument('-v', '--verbose', action='count', default=0)
	parser.add_argument('--config', help='path to the JSON run configuration')
	parser.add_argument('--level', type=int, help='icosphere subdivision level')
	parser.add_argument('--k', help='wave number as RE,IM')
	parser.add_argument('--shape', help='identity | scale:a | axes:a,b,c | star:cx,cy,cz,width,amp[;...]')
	parser.add_argument('--datum', help='constant:re[,im] | point:x,y,z | plane:dx,dy,dz')
	parser.add_argument('--out', help='output directory')
	parser.add_argument('--threads', type=int, help='assembly threads (default: $HELM_SCATTER_THREADS, then 1)')
	parser.add_argument('--strict', action='store_true', help='abort sweeps on the first failing point')

	args = parser.parse_args(argv)
	if args.verbose == 0:
		logging.basicConfig(level=logging.INFO)
	elif args.verbose == 1:
		logging.basicConfig(level=logging.DEBUG)
	else:
		logging.basicConfig(level=1)

	print(__banner__)

	try:
		if args.config is not None:
			config = RunConfig.from_file(args.config)
		else:
			config = RunConfig()
		config.override(
			level = args.level,
			k = args.k,
			shape = args.shape,
			datum = args.datum,
			out = args.out,
			threads = args.threads,
			strict = args.strict,
		)
	except ConfigError as e:
		logging.error('%s' % e)
		return int(ExitCode.CONFIG_ERROR)

	result = run_command(args.command, config)
	for path in result.artifacts:
		print(path)
	return int(result.code)


if __name__ == '__main__':
	sys.exit(run())

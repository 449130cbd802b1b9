#!/usr/bin/env python3
#
# Artifact writers. Every artifact carries the canonical run configuration
# and a sha256 digest of its payload; nothing time dependent is written.
#

import os
import io
import json
import hashlib
import logging

import numpy as np


def _plain(obj):
	if isinstance(obj, dict):
		return {str(k) : _plain(v) for k, v in obj.items()}
	if isinstance(obj, (list, tuple)):
		return [_plain(v) for v in obj]
	if isinstance(obj, np.ndarray):
		return _plain(obj.tolist())
	if isinstance(obj, (complex, np.complexfloating)):
		return [float(obj.real), float(obj.imag)]
	if isinstance(obj, np.floating):
		return float(obj)
	if isinstance(obj, (np.integer,)):
		return int(obj)
	if isinstance(obj, np.bool_):
		return bool(obj)
	return obj


def payload_digest(payload):
	return hashlib.sha256(json.dumps(_plain(payload), sort_keys = True).encode()).hexdigest()


def artifact(command, config, payload):
	"""JSON document {command, config, digest, payload}"""
	payload = _plain(payload)
	return {
		'command' : command,
		'config' : config.to_dict(),
		'config_digest' : config.digest(),
		'digest' : payload_digest(payload),
		'payload' : payload,
	}


class ArtifactWriter:
	def __init__(self, out_dir, command, config):
		self.out_dir = out_dir
		self.command = command
		self.config = config
		self.written = []

	def path(self, name):
		os.makedirs(self.out_dir, exist_ok = True)
		return os.path.join(self.out_dir, name)

	def json(self, name, payload):
		doc = artifact(self.command, self.config, payload)
		path = self.path(name)
		with open(path, 'w', newline = '\n') as f:
			f.write(json.dumps(doc, sort_keys = True, indent = 1))
			f.write('\n')
		self.written.append(path)
		logging.debug('Wrote %s (digest %s)' % (path, doc['digest'][:12]))
		return doc

	def csv(self, name, text):
		"""CSV body preceded by '#' comment lines with the config and the body digest"""
		buff = io.StringIO()
		buff.write('# config: %s\n' % self.config.canonical())
		buff.write('# digest: %s\n' % hashlib.sha256(text.encode()).hexdigest())
		buff.write(text)
		path = self.path(name)
		with open(path, 'w', newline = '\n') as f:
			f.write(buff.getvalue())
		self.written.append(path)
		return path

	def operator(self, name, op):
		"""Binary HSOP1 dump of a DenseOperator"""
		path = self.path(name)
		op.dump(path)
		self.written.append(path)
		return path

	def text(self, name, text):
		path = self.path(name)
		with open(path, 'w', newline = '\n') as f:
			f.write(text)
		self.written.append(path)
		return path


def read_artifact(path):
	with open(path, 'r') as f:
		return json.load(f)


def boundary_csv(surface, values, columns = ('re', 'im')):
	"""One row per panel: index, collocation point and the complex value"""
	buff = io.StringIO()
	buff.write('panel,x,y,z,%s\n' % ','.join(columns))
	for i, (p, v) in enumerate(zip(surface.points, values)):
		buff.write('%d,%.17g,%.17g,%.17g,%.17g,%.17g\n' % (i, p[0], p[1], p[2], v.real, v.imag))
	return buff.getvalue()


def family_csv(records):
	buff = io.StringIO()
	buff.write('t,re,im\n')
	for t, v in records:
		buff.write('%.17g,%.17g,%.17g\n' % (t, v.real, v.imag))
	return buff.getvalue()

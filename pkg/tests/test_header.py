import io

import pytest

from helmscatter.constants import OperatorKind, OPERATOR_MAGIC
from helmscatter.exceptions import OperatorHeaderSignatureMismatchException
from helmscatter.header import OperatorHeader


def _header():
	oh = OperatorHeader()
	oh.Size = 80
	oh.Kind = OperatorKind.W
	oh.WaveNumber = complex(1.0, 0.5)
	return oh


def test_header_size():
	assert len(_header().to_bytes()) == OperatorHeader.SIZE


def test_header_parse():
	data = _header().to_bytes()
	assert data.startswith(OPERATOR_MAGIC.encode('ascii'))
	oh = OperatorHeader.parse(io.BytesIO(data))
	assert oh.Size == 80
	assert oh.Kind == OperatorKind.W
	assert oh.WaveNumber == complex(1.0, 0.5)
	assert 'Size: 80' in str(oh)


def test_header_bad_magic():
	data = b'XXXXX' + _header().to_bytes()[5:]
	with pytest.raises(OperatorHeaderSignatureMismatchException):
		OperatorHeader.parse(io.BytesIO(data))

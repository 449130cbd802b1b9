from helmscatter.constants import OPERATOR_MAGIC, OperatorKind
from helmscatter.exceptions import OperatorHeaderSignatureMismatchException
import struct

# magic(5) | N: uint32 | kind: uint8 | Re k: float64 | Im k: float64, all little endian
class OperatorHeader:
	SIZE = 5 + 4 + 1 + 8 + 8

	def __init__(self):
		self.Signature = OPERATOR_MAGIC
		self.Size = None
		self.Kind = None
		self.WaveNumber = None

	def to_bytes(self):
		t = self.Signature.encode('ascii')
		t += self.Size.to_bytes(4, byteorder = 'little', signed = False)
		t += self.Kind.value.to_bytes(1, byteorder = 'little', signed = False)
		t += struct.pack('<d', self.WaveNumber.real)
		t += struct.pack('<d', self.WaveNumber.imag)
		return t

	@staticmethod
	def parse(buff):
		oh = OperatorHeader()
		oh.Signature = buff.read(5).decode('ascii', errors = 'replace')
		if oh.Signature != OPERATOR_MAGIC:
			raise OperatorHeaderSignatureMismatchException(oh.Signature)
		oh.Size = int.from_bytes(buff.read(4), byteorder = 'little', signed = False)
		oh.Kind = OperatorKind(int.from_bytes(buff.read(1), byteorder = 'little', signed = False))
		re_k, = struct.unpack('<d', buff.read(8))
		im_k, = struct.unpack('<d', buff.read(8))
		oh.WaveNumber = complex(re_k, im_k)
		return oh

	def __str__(self):
		t = '== OperatorHeader ==\n'
		t+= 'Signature: %s\n' % self.Signature
		t+= 'Size: %s\n' % self.Size
		t+= 'Kind: %s\n' % self.Kind
		t+= 'WaveNumber: %s\n' % self.WaveNumber
		return t

"""Finite-field and group arithmetic on secp256k1, hashing, and ECDSA.

The group is written multiplicatively to keep exponent notation readable:
``p * q`` combines two points and ``p ** k`` is scalar multiplication, so a
keypair satisfies ``public == G ** private`` and key homomorphism reads
``G ** (a + b) == G ** a * G ** b``.  Internally everything is computed
additively in Jacobian coordinates; only the abstract group is exposed.

All values are immutable and all operations are pure functions.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass
from random import Random
from typing import Iterator, Optional, Union

from .errors import ProtocolError
from .ripemd160 import ripemd160

# secp256k1 domain parameters
ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
FIELD_PRIME = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
_GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
_GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

SCALAR_BYTES = 32
POINT_BYTES = 33  # SEC1 compressed


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash160(data: bytes) -> bytes:
    """RIPEMD-160 of SHA-256, the 20-byte address hash."""
    return ripemd160(sha256(data))


def rand_bytes(n: int, rng: Optional[Random] = None) -> bytes:
    """``n`` random bytes; a seeded ``random.Random`` makes them reproducible."""
    if rng is None:
        return secrets.token_bytes(n)
    return rng.randbytes(n)


class Scalar:
    """Element of the exponent group, an integer modulo the curve order."""

    __slots__ = ("value",)

    def __init__(self, value: int):
        if not 0 <= value < ORDER:
            raise ValueError("scalar out of range")
        object.__setattr__(self, "value", value)

    @classmethod
    def reduce(cls, value: int) -> Scalar:
        return cls(value % ORDER)

    @classmethod
    def from_bytes(cls, data: bytes) -> Scalar:
        if len(data) != SCALAR_BYTES:
            raise ValueError(f"need {SCALAR_BYTES} bytes, got {len(data)}")
        return cls(int.from_bytes(data, "big"))

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(SCALAR_BYTES, "big")

    def __add__(self, other: Scalar) -> Scalar:
        return Scalar((self.value + other.value) % ORDER)

    def __sub__(self, other: Scalar) -> Scalar:
        return Scalar((self.value - other.value) % ORDER)

    def __mul__(self, other: Scalar) -> Scalar:
        return Scalar(self.value * other.value % ORDER)

    def __neg__(self) -> Scalar:
        return Scalar(-self.value % ORDER)

    def inverse(self) -> Scalar:
        if self.value == 0:
            raise ZeroDivisionError("cannot invert zero scalar")
        return Scalar(pow(self.value, -1, ORDER))

    def __eq__(self, other) -> bool:
        return isinstance(other, Scalar) and self.value == other.value

    def __hash__(self) -> int:
        return hash(self.value)

    def __bool__(self) -> bool:
        return self.value != 0

    def __setattr__(self, name, value):
        raise AttributeError("Scalar is immutable")

    def __repr__(self) -> str:
        return f"Scalar(0x{self.value:x})"


def random_scalar(rng: Optional[Random] = None) -> Scalar:
    """Uniform nonzero scalar via rejection sampling."""
    while True:
        v = int.from_bytes(rand_bytes(SCALAR_BYTES, rng), "big")
        if 0 < v < ORDER:
            return Scalar(v)


def hash_to_scalar(data: bytes) -> Scalar:
    """SHA-256 digest read as a big-endian integer, reduced modulo the order."""
    return Scalar.reduce(int.from_bytes(sha256(data), "big"))


# ---------------------------------------------------------------------------
# Jacobian arithmetic (module-private).  A point is (X, Y, Z) with
# x = X/Z^2, y = Y/Z^3; the identity is any triple with Z == 0.

_JID = (0, 1, 0)


def _jdouble(p):
    X, Y, Z = p
    if Z == 0 or Y == 0:
        return _JID
    S = 4 * X * Y * Y % FIELD_PRIME
    M = 3 * X * X % FIELD_PRIME
    X3 = (M * M - 2 * S) % FIELD_PRIME
    Y3 = (M * (S - X3) - 8 * pow(Y, 4, FIELD_PRIME)) % FIELD_PRIME
    Z3 = 2 * Y * Z % FIELD_PRIME
    return (X3, Y3, Z3)


def _jadd(p, q):
    if p[2] == 0:
        return q
    if q[2] == 0:
        return p
    X1, Y1, Z1 = p
    X2, Y2, Z2 = q
    Z1Z1 = Z1 * Z1 % FIELD_PRIME
    Z2Z2 = Z2 * Z2 % FIELD_PRIME
    U1 = X1 * Z2Z2 % FIELD_PRIME
    U2 = X2 * Z1Z1 % FIELD_PRIME
    S1 = Y1 * Z2 * Z2Z2 % FIELD_PRIME
    S2 = Y2 * Z1 * Z1Z1 % FIELD_PRIME
    if U1 == U2:
        if S1 != S2:
            return _JID
        return _jdouble(p)
    H = (U2 - U1) % FIELD_PRIME
    R = (S2 - S1) % FIELD_PRIME
    HH = H * H % FIELD_PRIME
    HHH = H * HH % FIELD_PRIME
    V = U1 * HH % FIELD_PRIME
    X3 = (R * R - HHH - 2 * V) % FIELD_PRIME
    Y3 = (R * (V - X3) - S1 * HHH) % FIELD_PRIME
    Z3 = Z1 * Z2 * H % FIELD_PRIME
    return (X3, Y3, Z3)


def _jmul(k, p):
    acc = _JID
    while k:
        if k & 1:
            acc = _jadd(acc, p)
        p = _jdouble(p)
        k >>= 1
    return acc


def _to_affine(p):
    X, Y, Z = p
    if Z == 0:
        return None
    zi = pow(Z, -1, FIELD_PRIME)
    zi2 = zi * zi % FIELD_PRIME
    return (X * zi2 % FIELD_PRIME, Y * zi2 * zi % FIELD_PRIME)


def _build_base_table():
    # 4-bit fixed windows over the base point: table[w][j] = (j * 16^w) * G
    table = []
    base = (_GX, _GY, 1)
    for _ in range(64):
        row = [_JID]
        for _ in range(15):
            row.append(_jadd(row[-1], base))
        table.append(row)
        for _ in range(4):
            base = _jdouble(base)
    return table


_BASE_TABLE = _build_base_table()


def _base_mul(k):
    acc = _JID
    for w in range(64):
        nibble = (k >> (4 * w)) & 15
        if nibble:
            acc = _jadd(acc, _BASE_TABLE[w][nibble])
    return acc


class Point:
    """secp256k1 group element: an affine curve point or the identity."""

    __slots__ = ("x", "y")

    def __init__(self, x: Optional[int], y: Optional[int]):
        if (x is None) != (y is None):
            raise ValueError("both coordinates or neither")
        if x is not None:
            if not (0 <= x < FIELD_PRIME and 0 <= y < FIELD_PRIME):
                raise ValueError("coordinate out of range")
            if (y * y - x * x * x - 7) % FIELD_PRIME != 0:
                raise ValueError("point not on curve")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def identity(cls) -> Point:
        return cls(None, None)

    def is_identity(self) -> bool:
        return self.x is None

    def encode(self) -> bytes:
        """SEC1 compressed encoding: parity prefix plus big-endian x."""
        if self.is_identity():
            raise ProtocolError("identity not encodable")
        prefix = b"\x03" if self.y & 1 else b"\x02"
        return prefix + self.x.to_bytes(32, "big")

    @classmethod
    def decode(cls, data: bytes) -> Point:
        if len(data) != POINT_BYTES or data[0] not in (2, 3):
            raise ProtocolError("invalid point", "bad length or prefix")
        x = int.from_bytes(data[1:], "big")
        if x >= FIELD_PRIME:
            raise ProtocolError("invalid point", "x out of range")
        y_sq = (pow(x, 3, FIELD_PRIME) + 7) % FIELD_PRIME
        y = pow(y_sq, (FIELD_PRIME + 1) // 4, FIELD_PRIME)
        if y * y % FIELD_PRIME != y_sq:
            raise ProtocolError("invalid point", "x not on curve")
        if (y & 1) != (data[0] & 1):
            y = FIELD_PRIME - y
        return cls(x, y)

    def _jacobian(self):
        return _JID if self.x is None else (self.x, self.y, 1)

    @classmethod
    def _from_jacobian(cls, p) -> Point:
        aff = _to_affine(p)
        return cls(None, None) if aff is None else cls(aff[0], aff[1])

    def __mul__(self, other: Point) -> Point:
        """Group operation: the product of two elements in multiplicative notation."""
        if not isinstance(other, Point):
            return NotImplemented
        return Point._from_jacobian(_jadd(self._jacobian(), other._jacobian()))

    def __pow__(self, exponent: Union[Scalar, int]) -> Point:
        """Repeated group operation; exponents live modulo the curve order."""
        k = exponent.value if isinstance(exponent, Scalar) else exponent % ORDER
        if k == 0 or self.is_identity():
            return Point.identity()
        if self.x == _GX and self.y == _GY:
            return Point._from_jacobian(_base_mul(k))
        return Point._from_jacobian(_jmul(k, self._jacobian()))

    def inverse(self) -> Point:
        if self.is_identity():
            return self
        return Point(self.x, FIELD_PRIME - self.y)

    def __eq__(self, other) -> bool:
        return isinstance(other, Point) and self.x == other.x and self.y == other.y

    def __hash__(self) -> int:
        return hash((self.x, self.y))

    def __setattr__(self, name, value):
        raise AttributeError("Point is immutable")

    def __repr__(self) -> str:
        if self.is_identity():
            return "Point(identity)"
        return f"Point(0x{self.x:064x}, parity={self.y & 1})"


G = Point(_GX, _GY)


def point_from_scalar(k: Scalar) -> Point:
    """``G ** k``; the zero exponent gives the identity."""
    return G ** k


@dataclass(frozen=True)
class KeyPair:
    """Private exponent and its public point, ``public == G ** private``."""

    private: Scalar
    public: Point

    @classmethod
    def from_private(cls, private: Scalar) -> KeyPair:
        if not private:
            raise ValueError("private key must be nonzero")
        return cls(private, G ** private)

    @classmethod
    def generate(cls, rng: Optional[Random] = None) -> KeyPair:
        return cls.from_private(random_scalar(rng))


@dataclass(frozen=True)
class Signature:
    """ECDSA signature; serializes as 64 bytes r || s."""

    r: Scalar
    s: Scalar

    def to_bytes(self) -> bytes:
        return self.r.to_bytes() + self.s.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> Signature:
        if len(data) != 64:
            raise ValueError(f"need 64 bytes, got {len(data)}")
        return cls(Scalar.from_bytes(data[:32]), Scalar.from_bytes(data[32:]))


def _nonces(priv: Scalar, msg_hash: bytes) -> Iterator[int]:
    # Deterministic nonce stream: keyed hash of (private key, message digest,
    # retry counter).  Reproducible signing, no RNG failure class.
    counter = 0
    while True:
        mac = hmac.new(priv.to_bytes(), msg_hash + counter.to_bytes(4, "big"), hashlib.sha256)
        yield int.from_bytes(mac.digest(), "big") % ORDER
        counter += 1


def ecdsa_sign(priv: Scalar, message: bytes) -> Signature:
    """Sign SHA-256(message); deterministic in (priv, message)."""
    if not priv:
        raise ValueError("private key must be nonzero")
    msg_hash = sha256(message)
    z = int.from_bytes(msg_hash, "big") % ORDER
    for k in _nonces(priv, msg_hash):
        if k == 0:
            continue
        r = (G ** k).x % ORDER
        if r == 0:
            continue
        s = pow(k, -1, ORDER) * (z + r * priv.value) % ORDER
        if s == 0:
            continue
        return Signature(Scalar(r), Scalar(s))


def ecdsa_verify(pub: Point, message: bytes, sig: Signature) -> bool:
    """True iff ``sig`` is valid on SHA-256(message) under ``pub``."""
    if not isinstance(sig, Signature) or pub.is_identity():
        return False
    r, s = sig.r.value, sig.s.value
    if r == 0 or s == 0:
        return False
    z = int.from_bytes(sha256(message), "big") % ORDER
    w = pow(s, -1, ORDER)
    u1 = z * w % ORDER
    u2 = r * w % ORDER
    candidate = (G ** u1) * (pub ** u2)
    if candidate.is_identity():
        return False
    return candidate.x % ORDER == r

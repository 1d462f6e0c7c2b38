"""Independent textbook implementations used only to cross-check the library.

Plain affine formulas over integer tuples, deliberately sharing no code
with the package (which computes in Jacobian coordinates behind classes).
"""

import hashlib

P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8
G = (GX, GY)


def point_add(p, q):
    """Affine addition; None is the identity."""
    if p is None:
        return q
    if q is None:
        return p
    x1, y1 = p
    x2, y2 = q
    if x1 == x2 and (y1 + y2) % P == 0:
        return None
    if p == q:
        lam = 3 * x1 * x1 * pow(2 * y1, -1, P) % P
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, P) % P
    x3 = (lam * lam - x1 - x2) % P
    return (x3, (lam * (x1 - x3) - y1) % P)


def point_double(p):
    return point_add(p, p)


def point_mul(k, p):
    acc = None
    while k:
        if k & 1:
            acc = point_add(acc, p)
        p = point_add(p, p)
        k >>= 1
    return acc


def on_curve(p):
    if p is None:
        return True
    x, y = p
    return (y * y - x * x * x - 7) % P == 0


def ecdsa_verify(pub, message: bytes, r: int, s: int) -> bool:
    """Textbook ECDSA verification over SHA-256(message)."""
    if pub is None or not on_curve(pub):
        return False
    if not (0 < r < N and 0 < s < N):
        return False
    z = int.from_bytes(hashlib.sha256(message).digest(), "big") % N
    w = pow(s, -1, N)
    candidate = point_add(point_mul(z * w % N, G), point_mul(r * w % N, pub))
    return candidate is not None and candidate[0] % N == r


def as_tuple(point):
    """Library Point -> affine tuple for oracle-side math."""
    return None if point.is_identity() else (point.x, point.y)

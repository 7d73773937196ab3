"""Arithmetic in finite fields F_q, q = p^m, with integer representatives.

An element is stored as an integer in ``[0, q)`` whose base-``p`` digits are
the coefficients of its polynomial representative (least significant digit is
the constant term). Addition is digit-wise modulo ``p``; multiplication goes
through discrete log / antilog tables built once per field.

The vectorised methods on :class:`FieldSpec` (``add``, ``mul``, ...) accept
ints or integer numpy arrays and are what the rest of the package uses.
:class:`FieldElement` is a thin checked wrapper for scalar work.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_ORDER = 1 << 16

# Irreducible (primitive) polynomials for F_{2^m}, bit i = coefficient of x^i.
BINARY_MODULI = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0b10001000000001011,
}


class FieldError(ValueError):
    """Invalid field parameters or mixing elements of different fields."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for d in range(2, int(n**0.5) + 1):
        if n % d == 0:
            return False
    return True


def _poly_mod(a: list[int], b: list[int], p: int) -> list[int]:
    """Remainder of a / b over F_p; coefficient lists are low-degree first."""
    a = [c % p for c in a]
    while a and a[-1] == 0:
        a.pop()
    db = len(b) - 1
    lead_inv = pow(b[-1], p - 2, p)
    while len(a) - 1 >= db and a:
        coef = a[-1] * lead_inv % p
        shift = len(a) - 1 - db
        for i, c in enumerate(b):
            a[shift + i] = (a[shift + i] - coef * c) % p
        while a and a[-1] == 0:
            a.pop()
    return a


def is_irreducible(coeffs: Sequence[int], p: int) -> bool:
    """Trial division by every monic polynomial of degree <= deg/2."""
    coeffs = [int(c) % p for c in coeffs]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    deg = len(coeffs) - 1
    if deg < 1:
        return False
    if deg == 1:
        return True
    if coeffs[0] == 0:
        return False
    for d in range(1, deg // 2 + 1):
        for low in itertools.product(range(p), repeat=d):
            divisor = list(low) + [1]
            if not _poly_mod(coeffs, divisor, p):
                return False
    return True


def default_modulus(p: int, m: int) -> tuple[int, ...]:
    """Pinned modulus for F_{p^m}: the built-in table for p = 2, otherwise the
    monic primitive polynomial with the smallest base-p encoding."""
    if m == 1:
        return (0, 1)
    if p == 2 and m in BINARY_MODULI:
        bits = BINARY_MODULI[m]
        return tuple((bits >> i) & 1 for i in range(m + 1))
    for code in range(p**m):
        low = [(code // p**i) % p for i in range(m)]
        cand = low + [1]
        if is_irreducible(cand, p) and _x_is_primitive(cand, p):
            return tuple(cand)
    raise FieldError(f"no irreducible polynomial of degree {m} over F_{p}")


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _x_is_primitive(mod: list[int], p: int) -> bool:
    """Whether x generates the multiplicative group of F_p[x]/(mod)."""
    m = len(mod) - 1
    n = p**m - 1

    def mulmod(a, b):
        prod = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                prod[i + j] += x * y
        return _poly_mod(prod, mod, p) or [0]

    def powx(e):
        result, base = [1], [0, 1]
        while e:
            if e & 1:
                result = mulmod(result, base)
            base = mulmod(base, base)
            e >>= 1
        return result

    return all(powx(n // ell) != [1] for ell in _prime_factors(n))


def _factor_prime_power(q: int) -> tuple[int, int]:
    for p in range(2, q + 1):
        if q % p == 0:
            m, rest = 0, q
            while rest % p == 0:
                rest //= p
                m += 1
            if rest != 1 or not _is_prime(p):
                break
            return p, m
    raise FieldError(f"{q} is not a prime power")


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """The finite field F_{p^m} together with its arithmetic tables.

    ``modulus`` lists the coefficients c_0..c_m of a monic irreducible
    polynomial (ignored for prime fields). Tables are built eagerly and never
    mutated, so a FieldSpec can be shared freely.
    """

    characteristic: int
    degree: int = 1
    modulus: tuple[int, ...] | None = None
    _digits: np.ndarray = field(init=False, repr=False)
    _exp: np.ndarray = field(init=False, repr=False)
    _log: np.ndarray = field(init=False, repr=False)
    _inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p, m = self.characteristic, self.degree
        if not _is_prime(p):
            raise FieldError(f"characteristic {p} is not prime")
        if m < 1:
            raise FieldError("degree must be >= 1")
        if p**m > MAX_ORDER:
            raise FieldError(f"field order {p}^{m} exceeds {MAX_ORDER}")
        if m == 1:
            mod = (0, 1)
        elif self.modulus is None:
            mod = default_modulus(p, m)
        else:
            mod = tuple(int(c) % p for c in self.modulus)
            if len(mod) != m + 1 or mod[-1] != 1:
                raise FieldError(f"modulus must be monic of degree {m}: {self.modulus}")
            if not is_irreducible(mod, p):
                raise FieldError(f"modulus {mod} is reducible over F_{p}")
        object.__setattr__(self, "modulus", mod)

        q = p**m
        reps = np.arange(q, dtype=np.int64)
        digits = np.stack([(reps // p**i) % p for i in range(m)], axis=1)
        object.__setattr__(self, "_digits", digits)

        exp, log = self._build_log_tables()
        inv = np.zeros(q, dtype=np.int64)
        inv[1:] = exp[(q - 1 - log[1:]) % (q - 1)]
        object.__setattr__(self, "_exp", exp)
        object.__setattr__(self, "_log", log)
        object.__setattr__(self, "_inv", inv)

    def _poly_mul_slow(self, a: int, b: int) -> int:
        """Schoolbook multiply-then-reduce; used only to build the tables."""
        p, m = self.characteristic, self.degree
        if m == 1:
            return a * b % p
        if p == 2:
            mod_bits = sum(c << i for i, c in enumerate(self.modulus))
            prod = 0
            while b:
                if b & 1:
                    prod ^= a
                b >>= 1
                a <<= 1
                if a >> m:
                    a ^= mod_bits
            return prod
        da = [(a // p**i) % p for i in range(m)]
        db = [(b // p**i) % p for i in range(m)]
        prod = [0] * (2 * m - 1)
        for i, x in enumerate(da):
            if x:
                for j, y in enumerate(db):
                    prod[i + j] += x * y
        rem = _poly_mod(prod, list(self.modulus), p)
        return sum(c * p**i for i, c in enumerate(rem))

    def _pow(self, g: int, e: int) -> int:
        result = 1
        while e:
            if e & 1:
                result = self._poly_mul_slow(result, g)
            g = self._poly_mul_slow(g, g)
            e >>= 1
        return result

    def _is_primitive(self, g: int) -> bool:
        n = self.order - 1
        return all(self._pow(g, n // ell) != 1 for ell in _prime_factors(n))

    def _times_x(self, a: int) -> int:
        p, m = self.characteristic, self.degree
        top = a // p ** (m - 1)
        a = (a % p ** (m - 1)) * p
        if top:
            digits = [(a // p**i) % p for i in range(m)]
            digits = [(d - top * c) % p for d, c in zip(digits, self.modulus)]
            a = sum(d * p**i for i, d in enumerate(digits))
        return a

    def _build_log_tables(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.order
        if q == 2:
            return np.array([1, 1], dtype=np.int64), np.zeros(2, dtype=np.int64)
        candidates = range(2, q)
        if self.degree > 1:
            # x itself is tried first; it is primitive for all default moduli
            p = self.characteristic
            candidates = itertools.chain([p], (g for g in range(2, q) if g != p))
        g = next((g for g in candidates if self._is_primitive(g)), None)
        if g is None:
            raise FieldError("no primitive element found; modulus is not irreducible")
        step = self._times_x if (self.degree > 1 and g == self.characteristic) else (
            lambda x: self._poly_mul_slow(x, g)
        )
        exp = np.empty(2 * (q - 1), dtype=np.int64)
        x = 1
        for k in range(q - 1):
            exp[k] = x
            x = step(x)
        if x != 1 or len(set(exp[: q - 1].tolist())) != q - 1:
            raise FieldError("modulus does not define a field")
        exp[q - 1 :] = exp[: q - 1]
        log = np.zeros(q, dtype=np.int64)
        log[exp[: q - 1]] = np.arange(q - 1)
        return exp, log

    @property
    def order(self) -> int:
        return self.characteristic**self.degree

    @property
    def q(self) -> int:
        return self.order

    def __eq__(self, other):
        if not isinstance(other, FieldSpec):
            return NotImplemented
        return (self.characteristic, self.degree, self.modulus) == (
            other.characteristic,
            other.degree,
            other.modulus,
        )

    def __hash__(self):
        return hash((self.characteristic, self.degree, self.modulus))

    def __repr__(self):
        if self.degree == 1:
            return f"GF({self.characteristic})"
        return f"GF({self.characteristic}^{self.degree}, modulus={list(self.modulus)})"

    # -- vectorised arithmetic on integer representatives -------------------

    def add(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        p, m = self.characteristic, self.degree
        if m == 1:
            return (a + b) % p
        if p == 2:
            return a ^ b
        dig = (self._digits[a] + self._digits[b]) % p
        return dig @ (p ** np.arange(m, dtype=np.int64))

    def neg(self, a):
        a = np.asarray(a, dtype=np.int64)
        p, m = self.characteristic, self.degree
        if p == 2:
            return a
        if m == 1:
            return (-a) % p
        dig = (-self._digits[a]) % p
        return dig @ (p ** np.arange(m, dtype=np.int64))

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.degree == 1:
            return a * b % self.characteristic
        prod = self._exp[self._log[a] + self._log[b]]
        return np.where((a == 0) | (b == 0), 0, prod)

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return self._inv[a]

    def dot(self, a, b):
        """a ⊗ b = Σ a(i)·b(i), reducing over the last axis."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if a.shape[-1] != b.shape[-1]:
            raise FieldError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
        if self.degree == 1:
            return (a * b).sum(axis=-1) % self.characteristic
        prod = self.mul(a, b)
        acc = np.zeros(np.broadcast_shapes(a.shape, b.shape)[:-1], dtype=np.int64)
        for i in range(prod.shape[-1]):
            acc = self.add(acc, prod[..., i])
        return acc

    def random(self, rng: np.random.Generator, size=None):
        # Generator.integers samples without modulo bias.
        return rng.integers(0, self.order, size=size, dtype=np.int64)

    def element(self, rep: int) -> FieldElement:
        return FieldElement(self, int(rep))


@lru_cache(maxsize=None)
def _gf_cached(p: int, m: int, modulus: tuple[int, ...] | None) -> FieldSpec:
    return FieldSpec(p, m, modulus)


def gf(q: int, modulus: Sequence[int] | None = None) -> FieldSpec:
    """Field of order ``q`` (cached), e.g. ``gf(8)`` is F_2[x]/(x^3+x+1)."""
    p, m = _factor_prime_power(int(q))
    if m == 1:
        modulus = None
    return _gf_cached(p, m, None if modulus is None else tuple(int(c) for c in modulus))


@dataclass(frozen=True)
class FieldElement:
    """A single element of ``field``; supports + - * / and unary minus."""

    field: FieldSpec
    rep: int

    def __post_init__(self):
        if not 0 <= self.rep < self.field.order:
            raise FieldError(f"representative {self.rep} outside [0, {self.field.order})")

    def _check(self, other) -> FieldElement:
        if not isinstance(other, FieldElement):
            return NotImplemented
        if other.field != self.field:
            raise FieldError(f"cannot combine elements of {self.field} and {other.field}")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, int(self.field.add(self.rep, other.rep)))

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, int(self.field.sub(self.rep, other.rep)))

    def __mul__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, int(self.field.mul(self.rep, other.rep)))

    def __truediv__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __neg__(self):
        return FieldElement(self.field, int(self.field.neg(self.rep)))

    def inverse(self) -> FieldElement:
        return FieldElement(self.field, int(self.field.inv(self.rep)))

    def __int__(self):
        return self.rep

    def __str__(self):
        return str(self.rep)


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()


def dot(a: Sequence[FieldElement], b: Sequence[FieldElement]) -> FieldElement:
    if len(a) != len(b):
        raise FieldError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise FieldError("dot of empty vectors has no field")
    acc = a[0] * b[0]
    for x, y in zip(a[1:], b[1:]):
        acc = acc + x * y
    return acc


@dataclass(frozen=True)
class IndexCodec:
    """Bijections between assignment indices and field vectors.

    ``alpha(k)`` is the little-endian base-q expansion of ``k`` into ``r``
    digits; ``beta`` maps a field element to its integer representative.
    """

    field: FieldSpec
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise FieldError("r must be >= 1")

    @property
    def size(self) -> int:
        return self.field.order**self.r

    def alpha(self, k: int) -> list[FieldElement]:
        if not 0 <= k < self.size:
            raise FieldError(f"index {k} outside [0, {self.size})")
        q = self.field.order
        return [FieldElement(self.field, (k // q**i) % q) for i in range(self.r)]

    def alpha_table(self) -> np.ndarray:
        """All of alpha at once: row k holds the r digits of k."""
        q = self.field.order
        ks = np.arange(self.size, dtype=np.int64)
        return np.stack([(ks // q**i) % q for i in range(self.r)], axis=1)

    def index(self, vec) -> int:
        """Inverse of alpha."""
        q = self.field.order
        digits = [int(v) for v in vec]
        if len(digits) != self.r or any(not 0 <= d < q for d in digits):
            raise FieldError(f"not a vector in F_{q}^{self.r}: {vec}")
        return sum(d * q**i for i, d in enumerate(digits))

    def indices(self, rows: np.ndarray) -> np.ndarray:
        """Vectorised inverse of alpha over the last axis."""
        q = self.field.order
        return np.asarray(rows, dtype=np.int64) @ (q ** np.arange(self.r, dtype=np.int64))

    @staticmethod
    def beta(x) -> int:
        return int(x)

"""Scalar and array helpers shared by the exact (rational) and float modes.

Exact mode stores values as ``fractions.Fraction`` inside numpy object arrays;
float mode uses ``float64`` arrays.  Every routine here works for both, so the
higher level modules never branch on the arithmetic mode themselves except when
they compare numbers.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import gmpy2
import numpy as np

FLOAT_RTOL = 1e-9


def as_fraction(x) -> Fraction:
    """Parse ``x`` (int, Fraction, ``"p/q"`` string, or exact float) as a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    raise TypeError(f"cannot interpret {x!r} as a rational number")


def fmt(x) -> str:
    """Serialize a scalar: rationals as ``"p/q"`` (or ``"p"``), floats via repr."""
    if isinstance(x, (Fraction, int, np.integer)):
        return str(Fraction(x))
    return repr(float(x))


def parse(s, exact: bool = True):
    if exact:
        return as_fraction(s)
    return float(Fraction(s)) if isinstance(s, str) else float(s)


def is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def to_exact(values) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat_in = arr.reshape(-1)
    flat_out = out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = as_fraction(v)
    return out


def to_float(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == object:
        return np.array([float(v) for v in arr.reshape(-1)], dtype=float).reshape(arr.shape)
    return arr.astype(float)


def convert(values, exact: bool) -> np.ndarray:
    return to_exact(values) if exact else to_float(values)


def const(x, exact: bool):
    return as_fraction(x) if exact else float(as_fraction(x) if isinstance(x, str) else x)


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape, dtype=float)


def full(shape, value, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(as_fraction(value))
        return out
    return np.full(shape, float(value), dtype=float)


def block_sum(arr: np.ndarray, factor: int = 2) -> np.ndarray:
    """Sum over aligned blocks of side ``factor`` along every axis."""
    d = arr.ndim
    n = arr.shape[0] // factor
    shape = []
    for _ in range(d):
        shape += [n, factor]
    return arr.reshape(shape).sum(axis=tuple(range(1, 2 * d, 2)))


def block_mean(arr: np.ndarray, factor: int = 2) -> np.ndarray:
    s = block_sum(arr, factor)
    return s * const(Fraction(1, factor ** arr.ndim), is_exact(arr))


def block_max(arr: np.ndarray, factor: int = 2) -> np.ndarray:
    d = arr.ndim
    n = arr.shape[0] // factor
    shape = []
    for _ in range(d):
        shape += [n, factor]
    return arr.reshape(shape).max(axis=tuple(range(1, 2 * d, 2)))


def upsample(arr: np.ndarray, factor: int) -> np.ndarray:
    """Replicate each entry into a block of side ``factor`` along every axis."""
    if factor == 1:
        return arr
    out = arr
    for axis in range(arr.ndim):
        out = np.repeat(out, factor, axis=axis)
    return out


def leq(a, b, exact: bool, rtol: float = FLOAT_RTOL):
    """Elementwise ``a <= b``; float mode allows a relative slack of ``rtol``."""
    if exact:
        return np.asarray(a <= b, dtype=bool) if isinstance(a, np.ndarray) else bool(a <= b)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    res = a <= b + rtol * np.maximum(1.0, np.abs(b))
    return res if res.ndim else bool(res)


def iroot_exact(n: int, q: int):
    """Integer ``q``-th root of ``n >= 0`` if it is exact, else ``None``."""
    r, exact = gmpy2.iroot(gmpy2.mpz(n), q)
    return int(r) if exact else None


def rpow(x, e):
    """``x ** e`` for ``x >= 0``; exact Fraction when the result is rational.

    ``e`` may be a Fraction.  Falls back to float when ``x`` is a float or the
    root is irrational.
    """
    e = as_fraction(e)
    if isinstance(x, (float, np.floating)):
        return float(x) ** float(e)
    x = as_fraction(x)
    if x == 0:
        if e > 0:
            return Fraction(0)
        if e == 0:
            return Fraction(1)
        raise ZeroDivisionError("0 raised to a negative power")
    y = x ** e.numerator
    if e.denominator == 1:
        return y
    num = iroot_exact(y.numerator, e.denominator)
    den = iroot_exact(y.denominator, e.denominator)
    if num is None or den is None:
        return float(x) ** float(e)
    return Fraction(num, den)


def rpow_array(arr: np.ndarray, e) -> np.ndarray:
    """Elementwise :func:`rpow`; the result is exact only if every entry is."""
    if not is_exact(arr):
        return np.asarray(arr, dtype=float) ** float(as_fraction(e))
    flat = [rpow(v, e) for v in arr.reshape(-1)]
    if all(isinstance(v, Fraction) for v in flat):
        out = np.empty(arr.shape, dtype=object)
        out.reshape(-1)[:] = flat
        return out
    return np.array([float(v) for v in flat], dtype=float).reshape(arr.shape)


def array_max(arr: np.ndarray):
    return max(arr.reshape(-1)) if arr.size else None

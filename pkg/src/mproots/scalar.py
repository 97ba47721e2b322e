"""Multiple-precision real and complex scalars.

Thin layer over gmpy2 (MPFR/MPC).  Every value carries the mantissa length it
was created with; operations round to nearest at the precision of the active
gmpy2 context, so all arithmetic in this package runs inside
``with ctx.active():`` blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpc, mpfr

MIN_BITS = 24

MPReal = type(mpfr(0))
MPComplex = type(mpc(0))


class InvalidPrecisionError(ValueError):
    pass


@dataclass(frozen=True)
class PrecisionContext:
    """Mantissa length (in bits) governing rounding of every scalar operation."""

    bits: int

    def __post_init__(self):
        if not isinstance(self.bits, int) or isinstance(self.bits, bool):
            raise InvalidPrecisionError(f"bits must be an integer, got {self.bits!r}")
        if self.bits < MIN_BITS:
            raise InvalidPrecisionError(f"precision {self.bits} bits is below the {MIN_BITS}-bit floor")

    def active(self) -> gmpy2.context:
        """A gmpy2 context usable as ``with ctx.active(): ...``."""
        return gmpy2.context(
            precision=self.bits,
            round=gmpy2.RoundToNearest,
            emin=gmpy2.get_emin_min(),
            emax=gmpy2.get_emax_max(),
        )

    @property
    def digits(self) -> int:
        """Decimal digits needed for an exact round trip of a value at this precision."""
        return math.ceil(self.bits * math.log10(2)) + 2

    def real(self, x=0) -> MPReal:
        if isinstance(x, str):
            return mpfr(x, self.bits)
        with self.active():
            return mpfr(x)

    def complex(self, re=0, im=0) -> MPComplex:
        with self.active():
            return mpc(self.real(re), self.real(im))

    def __str__(self):
        return f"{self.bits} bits"


def with_precision(bits: int) -> PrecisionContext:
    return PrecisionContext(bits)


def precision_of(x) -> int:
    p = x.precision
    return p[0] if isinstance(p, tuple) else p


def context_of(x) -> PrecisionContext:
    return PrecisionContext(precision_of(x))


def convert(x, target: PrecisionContext):
    """Round ``x`` (real or complex) to nearest at ``target``; widening is exact."""
    if isinstance(x, MPComplex):
        with target.active():
            return mpc(mpfr(x.real, target.bits), mpfr(x.imag, target.bits))
    return mpfr(x, target.bits)


def cabs(z) -> MPReal:
    """|z| rounded at z's own precision (MPC computes a correctly rounded hypot)."""
    with context_of(z).active():
        return abs(z)


def is_finite(z) -> bool:
    if isinstance(z, MPComplex):
        return gmpy2.is_finite(z.real) and gmpy2.is_finite(z.imag)
    return gmpy2.is_finite(z)


# Serialization: "<bits>:<sign><digits>e<exp>", value = sign * int(digits) * 10**exp.

def format_real(x, bits: int | None = None) -> str:
    if not gmpy2.is_finite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    bits = precision_of(x) if bits is None else bits
    ndig = PrecisionContext(bits).digits
    mant, exp, _ = mpfr(x, bits).digits(10, ndig)
    sign = "-" if mant.startswith("-") else "+"
    mant = mant.lstrip("-")
    if mpfr(x) == 0:
        return f"{bits}:{sign}0e0"
    # digits() means 0.<mant> * 10**exp; rewrite with an integer mantissa
    stripped = mant.rstrip("0")
    exp10 = exp - len(stripped)
    return f"{bits}:{sign}{stripped}e{exp10}"


def parse_real(text: str) -> MPReal:
    text = text.strip()
    try:
        bits_s, body = text.split(":", 1)
        bits = int(bits_s)
    except ValueError:
        raise ValueError(f"malformed number {text!r}: expected '<bits>:<sign><digits>e<exp>'") from None
    if not body or body[0] not in "+-" or "e" not in body:
        raise ValueError(f"malformed number {text!r}")
    mant, _, exp = body[1:].partition("e")
    if not mant.isdigit() or not exp.lstrip("-").isdigit():
        raise ValueError(f"malformed number {text!r}")
    ctx = PrecisionContext(bits)
    value = ctx.real(f"{mant}e{exp}")
    with ctx.active():
        return -value if body[0] == "-" else value


def sci(x, sig: int = 17) -> str:
    """Scientific notation with ``sig`` significant digits, e.g. '1.250e-3'."""
    if not isinstance(x, MPReal):
        x = mpfr(x)
    if not gmpy2.is_finite(x):
        return str(x)
    if x == 0:
        return "0." + "0" * (sig - 1) + "e+0"
    mant, exp, _ = x.digits(10, sig)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    e = exp - 1
    return f"{sign}{mant[0]}.{mant[1:]}e{'+' if e >= 0 else '-'}{abs(e)}"

"""Real-coefficient polynomials, Horner evaluation and the two benchmark families."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .scalar import MPComplex, PrecisionContext, context_of, convert


class DegenerateLeadingCoefficientError(ValueError):
    pass


class InsufficientPrecisionError(ValueError):
    pass


class PoleError(ValueError):
    pass


KINDS = ("wilkinson", "chebyshev", "generic")


@dataclass(frozen=True)
class Polynomial:
    """p(x) = sum a_i x^i, coefficients a_0..a_n stored at ``ctx``."""

    coeffs: tuple
    ctx: PrecisionContext
    kind: str = "generic"

    def __post_init__(self):
        if len(self.coeffs) < 2:
            raise ValueError("polynomial degree must be at least 1")
        if self.coeffs[-1] == 0:
            raise DegenerateLeadingCoefficientError("leading coefficient a_n is zero")
        if self.kind not in KINDS:
            raise ValueError(f"unknown polynomial kind {self.kind!r}")

    @classmethod
    def from_values(cls, values: Sequence, ctx: PrecisionContext, kind: str = "generic") -> "Polynomial":
        return cls(tuple(ctx.real(v) for v in values), ctx, kind)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def at(self, ctx: PrecisionContext) -> "Polynomial":
        """Same polynomial with coefficients rounded (or exactly widened) to ``ctx``."""
        return Polynomial(tuple(convert(a, ctx) for a in self.coeffs), ctx, self.kind)


@dataclass(frozen=True)
class MonicPolynomial:
    """q(x) = x^n + sum c_i x^i with c_0..c_{n-1} stored at ``ctx``."""

    coeffs: tuple
    ctx: PrecisionContext

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise ValueError("monic polynomial degree must be at least 1")

    @property
    def degree(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class ReferenceRoots:
    roots: tuple
    ctx: PrecisionContext
    provenance: str  # "analytic" | "high-precision-solve"

    def __len__(self):
        return len(self.roots)


def make_monic(p: Polynomial) -> MonicPolynomial:
    an = p.coeffs[-1]
    if an == 0:
        raise DegenerateLeadingCoefficientError("leading coefficient a_n is zero")
    with p.ctx.active():
        return MonicPolynomial(tuple(a / an for a in p.coeffs[:-1]), p.ctx)


def evaluate(p: Polynomial | MonicPolynomial, z) -> MPComplex:
    """Horner evaluation at p's precision."""
    with p.ctx.active():
        if isinstance(p, MonicPolynomial):
            acc = mpc(1)
            coeffs = p.coeffs
        else:
            acc = mpc(p.coeffs[-1])
            coeffs = p.coeffs[:-1]
        for c in reversed(coeffs):
            acc = acc * z + c
        return acc


def eval_with_derivative(p: Polynomial | MonicPolynomial, z) -> tuple[MPComplex, MPComplex]:
    """(p(z), p'(z)) from one fused Horner pass."""
    with p.ctx.active():
        if isinstance(p, MonicPolynomial):
            b = mpc(1)
            coeffs = p.coeffs
        else:
            b = mpc(p.coeffs[-1])
            coeffs = p.coeffs[:-1]
        d = mpc(0)
        for c in reversed(coeffs):
            d = d * z + b
            b = b * z + c
        return b, d


def _significant_bits(k: int) -> int:
    k = abs(k)
    if k == 0:
        return 0
    k >>= (k & -k).bit_length() - 1
    return k.bit_length()


def wilkinson(n: int, ctx: PrecisionContext) -> tuple[Polynomial, ReferenceRoots]:
    """prod_{i=1..n} (x - i), expanded exactly in integers; roots are 1..n."""
    if n < 1:
        raise ValueError("degree must be at least 1")
    coeffs = [1]  # ascending powers
    for i in range(1, n + 1):
        nxt = [0] * (len(coeffs) + 1)
        for k, a in enumerate(coeffs):
            nxt[k + 1] += a
            nxt[k] -= i * a
        coeffs = nxt
        need = max(_significant_bits(a) for a in coeffs)
        if need > ctx.bits:
            raise InsufficientPrecisionError(
                f"wilkinson({n}) coefficients need {need} bits at step {i}; context has {ctx.bits}"
            )
    poly = Polynomial(tuple(ctx.real(a) for a in coeffs), ctx, "wilkinson")
    roots = tuple(ctx.complex(i) for i in range(1, n + 1))
    return poly, ReferenceRoots(roots, ctx, "analytic")


def wilkinson_bits(n: int) -> int:
    """Smallest mantissa length holding every coefficient of wilkinson(n) exactly."""
    coeffs = [1]
    need = 1
    for i in range(1, n + 1):
        nxt = [0] * (len(coeffs) + 1)
        for k, a in enumerate(coeffs):
            nxt[k + 1] += a
            nxt[k] -= i * a
        coeffs = nxt
        need = max(need, max(_significant_bits(a) for a in coeffs))
    return need


def _chebyshev_coeffs(n: int, bits: int) -> list:
    # Newton's identities with power sums s_m = n/(m+1) (m even), 0 (m odd).
    # Only even elementary symmetric functions survive:
    #   e_{2k} = -(1/2k) sum_{j=1..k} e_{2(k-j)} * n/(2j+1),   a_{n-2k} = e_{2k}
    ctx = PrecisionContext(bits)
    with ctx.active():
        e = [mpfr(1)]
        s = [None] + [mpfr(n) / (2 * j + 1) for j in range(1, n // 2 + 1)]
        for k in range(1, n // 2 + 1):
            acc = gmpy2.fsum([e[k - j] * s[j] for j in range(1, k + 1)]) if k > 1 else e[0] * s[1]
            e.append(-acc / (2 * k))
        coeffs = [mpfr(0)] * (n + 1)
        for k, ek in enumerate(e):
            coeffs[n - 2 * k] = ek
    return coeffs


def chebyshev_poly(n: int, ctx: PrecisionContext) -> Polynomial:
    """Monic polynomial whose roots are the equal-weight (2/n) quadrature nodes on [-1, 1].

    Coefficients are generated at twice the working precision and regenerated
    at four times it; the two runs must agree to the working precision, which
    exposes the catastrophic cancellation that grows with n.
    """
    if n < 1:
        raise ValueError("degree must be at least 1")
    gen = _chebyshev_coeffs(n, 2 * ctx.bits)
    check = _chebyshev_coeffs(n, 4 * ctx.bits)
    with PrecisionContext(4 * ctx.bits).active():
        tol = gmpy2.mul_2exp(mpfr(1), -ctx.bits)
        unstable = [i for i, (a, b) in enumerate(zip(gen, check)) if abs(a - b) > tol * abs(b)]
    if unstable:
        raise InsufficientPrecisionError(
            f"chebyshev({n}) coefficient a_{unstable[0]} is not stable to {ctx.bits} bits "
            f"when generated at {2 * ctx.bits} bits"
        )
    return Polynomial(tuple(convert(a, ctx) for a in gen), ctx, "chebyshev")


def limit_curve_residual(z) -> gmpy2.mpfr:
    """| |(z+1)^((z+1)/2) (z-1)^(-(z-1)/2)| - 2 |, principal branch logs."""
    ctx = context_of(z)
    with ctx.active():
        z = mpc(z)
        if z == 1 or z == -1:
            raise PoleError("limit curve is singular at z = +-1")
        w = (z + 1) / 2 * gmpy2.log(z + 1) - (z - 1) / 2 * gmpy2.log(z - 1)
        return abs(gmpy2.exp(w.real) - 2)

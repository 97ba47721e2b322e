from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from mproots.dk import SolveConfig, solve
from mproots.eigen import eigen_roots
from mproots.polynomial import Polynomial
from mproots.scalar import PrecisionContext


def chebyshev_exact(n):
    """Exact rational coefficients a_0..a_n of the equal-weight quadrature polynomial.

    Oracle: Newton's identities over Fractions with power sums n/(m+1) (m even).
    """
    s = [Fraction(0)] + [Fraction(n, m + 1) if m % 2 == 0 else Fraction(0) for m in range(1, n + 1)]
    e = [Fraction(1)]
    for k in range(1, n + 1):
        acc = sum(((-1) ** (i - 1)) * e[k - i] * s[i] for i in range(1, k + 1))
        e.append(acc / k)
    # p(x) = sum_k (-1)^k e_k x^(n-k)
    coeffs = [Fraction(0)] * (n + 1)
    for k in range(n + 1):
        coeffs[n - k] = (-1) ** k * e[k]
    return coeffs


def to_mpfr(q: Fraction, bits: int):
    # mpq -> mpfr is a single correct rounding
    return mpfr(gmpy2.mpq(q.numerator, q.denominator), bits)


def rel_err(a, b, bits=2048):
    with PrecisionContext(bits).active():
        d = abs(a - b)
        m = abs(b)
        return d / m if m != 0 else d


def high_precision_roots(p: Polynomial, bits: int):
    """Roots of p's coefficients (exactly widened) computed at ``bits``."""
    hi = PrecisionContext(bits)
    ph = p.at(hi)
    seed = eigen_roots(ph, PrecisionContext(212))
    res = solve(ph, seed, SolveConfig(eps_rel=f"1e-{int(bits * 0.28)}", eps_abs="1e-900", order=3, max_iter=500))
    assert res.converged
    return ph, res.roots.values

"""Eigenvalue method: companion matrix, balancing and Francis double-shift QR."""

from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpc, mpfr

from .polynomial import MonicPolynomial, Polynomial, make_monic
from .scalar import PrecisionContext


class NonConvergenceError(RuntimeError):
    """QR iteration ran out of sweeps; ``eigenvalues`` holds what was deflated so far."""

    def __init__(self, message, eigenvalues=(), sweeps=0):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)
        self.sweeps = sweeps


@dataclass(frozen=True)
class CompanionMatrix:
    """Upper Hessenberg companion: ones on the subdiagonal, -c_i down the last column.

    ``scale`` is the diagonal D of a balancing similarity D^-1 M D (all ones
    before balancing).
    """

    rows: tuple
    ctx: PrecisionContext
    scale: tuple = field(default=())

    @property
    def n(self) -> int:
        return len(self.rows)

    def to_lists(self) -> list:
        return [list(r) for r in self.rows]

    def max_abs(self):
        return max(abs(x) for r in self.rows for x in r)


@dataclass(frozen=True)
class InitialGuessSet:
    guesses: tuple
    ctx: PrecisionContext
    source: str  # "eigen-low" | "aberth"
    sweeps: int = 0

    def __len__(self):
        return len(self.guesses)


def companion_matrix(q: MonicPolynomial) -> CompanionMatrix:
    n = q.degree
    ctx = q.ctx
    with ctx.active():
        zero, one = mpfr(0), mpfr(1)
        rows = [[zero] * n for _ in range(n)]
        for i in range(n - 1):
            rows[i + 1][i] = one
        for i, c in enumerate(q.coeffs):
            rows[i][n - 1] = -c
    return CompanionMatrix(tuple(tuple(r) for r in rows), ctx, tuple([mpfr(1)] * n))


def balance(m: CompanionMatrix, max_passes: int = 200) -> CompanionMatrix:
    """Power-of-two diagonal scaling equalizing off-diagonal row and column 1-norms.

    On exit every row/column pair with both norms nonzero has norms within a
    factor of 2.  Scaling by powers of two is exact, so the spectrum is unchanged.
    """
    n = m.n
    a = m.to_lists()
    scale = list(m.scale) if m.scale else [mpfr(1)] * n
    with m.ctx.active():
        for _ in range(max_passes):
            changed = False
            for i in range(n):
                c = gmpy2.fsum([abs(a[j][i]) for j in range(n) if j != i])
                r = gmpy2.fsum([abs(a[i][j]) for j in range(n) if j != i])
                if c == 0 or r == 0:
                    continue
                # f = 2^k with k nearest to log2(sqrt(r/c))
                k = int(gmpy2.rint(gmpy2.log2(r / c) / 2))
                if k == 0:
                    continue
                f = gmpy2.mul_2exp(mpfr(1), k)
                if c * f + r / f >= c + r:
                    continue
                for j in range(n):
                    a[j][i] = gmpy2.mul_2exp(a[j][i], k)
                    a[i][j] = gmpy2.mul_2exp(a[i][j], -k)
                scale[i] = gmpy2.mul_2exp(scale[i], k)
                changed = True
            if not changed:
                break
    return CompanionMatrix(tuple(tuple(r) for r in a), m.ctx, tuple(scale))


def _sign(a, b):
    return abs(a) if b >= 0 else -abs(a)


def francis_qr(m: CompanionMatrix, max_sweeps: int = 30) -> tuple[list, int]:
    """Eigenvalues of an upper Hessenberg matrix plus the number of QR sweeps used.

    Implicit double-shift QR restricted to the active window (no eigenvectors).
    Deflation: |h[l][l-1]| <= eps (|h[l-1][l-1]| + |h[l][l]|), eps = 2^(2-bits).
    Exceptional shifts after every 10 stalled sweeps on one eigenvalue.
    """
    n = m.n
    a = m.to_lists()
    ctx = m.ctx
    wr = [None] * n
    wi = [None] * n
    budget = max_sweeps * n
    sweeps = 0
    with ctx.active():
        zero = mpfr(0)
        eps = gmpy2.mul_2exp(mpfr(1), 2 - ctx.bits)
        anorm = gmpy2.fsum([abs(a[i][j]) for i in range(n) for j in range(max(i - 1, 0), n)])
        nn = n - 1
        t = zero
        while nn >= 0:
            its = 0
            while True:
                l = nn
                while l >= 1:
                    s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                    if s == 0:
                        s = anorm
                    if abs(a[l][l - 1]) <= eps * s:
                        a[l][l - 1] = zero
                        break
                    l -= 1
                x = a[nn][nn]
                if l == nn:
                    wr[nn], wi[nn] = x + t, zero
                    nn -= 1
                    break
                y = a[nn - 1][nn - 1]
                w = a[nn][nn - 1] * a[nn - 1][nn]
                if l == nn - 1:
                    p = (y - x) / 2
                    q = p * p + w
                    z = gmpy2.sqrt(abs(q))
                    x = x + t
                    if q >= 0:
                        z = p + _sign(z, p)
                        wr[nn - 1] = wr[nn] = x + z
                        if z != 0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = zero
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn - 1] = z
                        wi[nn] = -z
                    nn -= 2
                    break
                if sweeps >= budget:
                    done = [mpc(wr[i], wi[i]) for i in range(nn + 1, n)]
                    raise NonConvergenceError(
                        f"QR did not converge within {budget} sweeps ({n - nn - 1} of {n} eigenvalues found)",
                        done,
                        sweeps,
                    )
                if its and its % 10 == 0:
                    t += x
                    for i in range(nn + 1):
                        a[i][i] -= x
                    s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                    x = y = s * 3 / 4
                    w = -s * s * 7 / 16
                its += 1
                sweeps += 1
                # look for two consecutive small subdiagonal elements
                mm = nn - 2
                while mm >= l:
                    z = a[mm][mm]
                    r = x - z
                    s = y - z
                    p = (r * s - w) / a[mm + 1][mm] + a[mm][mm + 1]
                    q = a[mm + 1][mm + 1] - z - r - s
                    r = a[mm + 2][mm + 1]
                    s = abs(p) + abs(q) + abs(r)
                    p, q, r = p / s, q / s, r / s
                    if mm == l:
                        break
                    u = abs(a[mm][mm - 1]) * (abs(q) + abs(r))
                    v = abs(p) * (abs(a[mm - 1][mm - 1]) + abs(z) + abs(a[mm + 1][mm + 1]))
                    if u <= eps * v:
                        break
                    mm -= 1
                for i in range(mm + 2, nn + 1):
                    a[i][i - 2] = zero
                    if i != mm + 2:
                        a[i][i - 3] = zero
                # chase the bulge
                for k in range(mm, nn):
                    if k != mm:
                        p = a[k][k - 1]
                        q = a[k + 1][k - 1]
                        r = a[k + 2][k - 1] if k != nn - 1 else zero
                        x = abs(p) + abs(q) + abs(r)
                        if x != 0:
                            p, q, r = p / x, q / x, r / x
                    s = _sign(gmpy2.sqrt(p * p + q * q + r * r), p)
                    if s == 0:
                        continue
                    if k == mm:
                        if l != mm:
                            a[k][k - 1] = -a[k][k - 1]
                    else:
                        a[k][k - 1] = -s * x
                    p = p + s
                    x, y, z = p / s, q / s, r / s
                    q, r = q / p, r / p
                    rk, rk1 = a[k], a[k + 1]
                    if k != nn - 1:
                        rk2 = a[k + 2]
                        for j in range(k, nn + 1):
                            p = rk[j] + q * rk1[j] + r * rk2[j]
                            rk2[j] -= p * z
                            rk1[j] -= p * y
                            rk[j] -= p * x
                    else:
                        for j in range(k, nn + 1):
                            p = rk[j] + q * rk1[j]
                            rk1[j] -= p * y
                            rk[j] -= p * x
                    top = min(nn, k + 3)
                    if k != nn - 1:
                        for i in range(l, top + 1):
                            ri = a[i]
                            p = x * ri[k] + y * ri[k + 1] + z * ri[k + 2]
                            ri[k + 2] -= p * r
                            ri[k + 1] -= p * q
                            ri[k] -= p
                    else:
                        for i in range(l, top + 1):
                            ri = a[i]
                            p = x * ri[k] + y * ri[k + 1]
                            ri[k + 1] -= p * q
                            ri[k] -= p
        return [mpc(wr[i], wi[i]) for i in range(n)], sweeps


def hessenberg_qr_eigenvalues(m: CompanionMatrix, max_sweeps: int = 30) -> list:
    return francis_qr(m, max_sweeps)[0]


def eigen_roots(p: Polynomial, low: PrecisionContext, max_sweeps: int = 30) -> InitialGuessSet:
    """All roots of p as companion-matrix eigenvalues computed at ``low`` precision."""
    q = make_monic(p.at(low))
    eigs, sweeps = francis_qr(balance(companion_matrix(q)), max_sweeps)
    return InitialGuessSet(tuple(eigs), low, "eigen-low", sweeps)

"""Direct iterative method: Aberth start, 2nd/3rd order Durand-Kerner sweeps.

Sweeps run in one of two update modes:

* ``jacobi`` -- every correction reads the snapshot of the previous sweep, so
  the result does not depend on how indices are split across workers;
* ``gauss-seidel`` -- corrections are applied in place in index order.

With ``threads > 1`` the unfrozen indices are cut into contiguous blocks and
each block is updated by a worker process (gmpy2 holds the GIL, so threads
would serialize).  In gauss-seidel mode a worker sees its own block's fresh
values but the other blocks' values from the start of the sweep, which is
what makes iteration counts depend on the worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import reduce
from itertools import repeat
from operator import mul, sub
from typing import Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .eigen import InitialGuessSet
from .polynomial import MonicPolynomial, Polynomial, make_monic
from .scalar import PrecisionContext, convert, is_finite

MODES = ("jacobi", "gauss-seidel")


class DivergenceError(ArithmeticError):
    def __init__(self, index: int, sweep: int):
        super().__init__(f"root {index} became non-finite at sweep {sweep}")
        self.index = index
        self.sweep = sweep


class SingularDerivativeError(ZeroDivisionError):
    def __init__(self, index: int):
        super().__init__(f"derivative correction for root {index} is singular after perturbation")
        self.index = index


class _Coincident(Exception):
    pass


@dataclass(frozen=True)
class RootVector:
    values: tuple
    ctx: PrecisionContext
    frozen: tuple = ()
    k: int = 0

    def __post_init__(self):
        if not self.frozen:
            object.__setattr__(self, "frozen", (False,) * len(self.values))
        if len(self.frozen) != len(self.values):
            raise ValueError("frozen flags and values differ in length")

    def __len__(self):
        return len(self.values)

    @classmethod
    def of(cls, values: Sequence, ctx: PrecisionContext) -> "RootVector":
        with ctx.active():
            return cls(tuple(mpc(v) for v in values), ctx)


@dataclass(frozen=True)
class SolveConfig:
    eps_rel: object = "1e-60"
    eps_abs: object = "1e-300"
    max_iter: int = 20000
    order: int = 2
    update_mode: str = "jacobi"
    threads: int = 1

    def __post_init__(self):
        if self.order not in (2, 3):
            raise ValueError(f"order must be 2 or 3, got {self.order}")
        if self.update_mode not in MODES:
            raise ValueError(f"update_mode must be one of {MODES}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if mpfr(str(self.eps_rel)) < 0:
            raise ValueError("eps_rel must be >= 0")
        if mpfr(str(self.eps_abs)) <= 0:
            raise ValueError("eps_abs must be > 0")

    def tolerances(self, ctx: PrecisionContext):
        return ctx.real(str(self.eps_rel)), ctx.real(str(self.eps_abs))


@dataclass
class SolveResult:
    roots: RootVector
    iterations: int
    converged: bool
    steps: tuple
    wall_seconds: float
    seed: str = "aberth"
    seed_seconds: float = 0.0
    seed_fallback: bool = False
    notes: list = field(default_factory=list)


# --- initial guesses ---------------------------------------------------------

def aberth_radius(p: Polynomial):
    q = make_monic(p)
    n = q.degree
    nnz = sum(1 for a in p.coeffs[:-1] if a != 0)
    with p.ctx.active():
        r = mpfr(0)
        for i, c in enumerate(q.coeffs):
            if c != 0:
                r = max(r, gmpy2.root(abs(nnz * c), n - i))
        return r if r != 0 else mpfr(1)


def aberth_init(p: Polynomial) -> RootVector:
    q = make_monic(p)
    n = q.degree
    r = aberth_radius(p)
    with p.ctx.active():
        center = -q.coeffs[-1] / n
        pi = gmpy2.const_pi()
        zs = []
        for i in range(n):
            s, c = gmpy2.sin_cos(2 * i * pi / n + mpfr(3) / (2 * n))
            zs.append(mpc(center + r * c, r * s))
    return RootVector(tuple(zs), p.ctx)


def separate(values: list, frozen: Sequence[bool], ctx: PrecisionContext) -> int:
    """Push apart (in place) unfrozen entries closer than 2^(8-bits) max(1, |z|).

    A later index colliding with an earlier one is shifted by
    m * 2^(-bits/2) * (1+i), m counting attempts.  Returns the number of shifts.
    """
    shifts = 0
    with ctx.active():
        tol2 = gmpy2.mul_2exp(mpfr(1), 2 * (8 - ctx.bits))
        delta = gmpy2.mul_2exp(mpc(1, 1), -(ctx.bits // 2))
        for j in range(1, len(values)):
            if frozen[j]:
                continue
            base = values[j]
            m = 0
            while True:
                zj = values[j]
                scale = max(mpfr(1), gmpy2.norm(zj))
                if not any(gmpy2.norm(zj - values[i]) < tol2 * scale for i in range(j) if not frozen[i]):
                    break
                m += 1
                values[j] = base + m * delta
                shifts += 1
    return shifts


# --- single corrections --------------------------------------------------------

def _horner_monic(coeffs_rev, z):
    acc = mpc(1)
    for c in coeffs_rev:
        acc = acc * z + c
    return acc


def _horner_deriv(lead, coeffs_rev, z):
    b = mpc(lead)
    d = mpc(0)
    for c in coeffs_rev:
        d = d * z + b
        b = b * z + c
    return b, d


def _dk2_correct(coeffs_rev, z, i, zi):
    num = _horner_monic(coeffs_rev, zi)
    if num == 0:
        return zi
    den = reduce(mul, map(sub, repeat(zi, i), z[:i]), mpc(1))
    den = reduce(mul, map(sub, repeat(zi, len(z) - i - 1), z[i + 1:]), den)
    if den == 0:
        raise _Coincident(i)
    return zi - num / den


def _pair_inverse_sums(z, active):
    """sum_{j != i} 1/(z_i - z_j) for every active i, one division per pair.

    Uses 1/(z_j - z_i) == -(1/(z_i - z_j)) (exact under round-to-nearest) and
    accumulates in ascending j, so each sum is bit-identical to the direct loop.
    """
    n = len(z)
    sums = [mpc(0)] * n
    for i in range(n):
        zi = z[i]
        ai = active[i]
        si = sums[i]
        for j in range(i + 1, n):
            if ai or active[j]:
                d = zi - z[j]
                if d == 0:
                    raise _Coincident(i)
                inv = 1 / d
                si += inv
                sums[j] -= inv
        sums[i] = si
    return sums


def _inverse_sum(z, i, zi):
    s = mpc(0)
    for d in map(sub, repeat(zi, i), z[:i]):
        s += 1 / d
    for d in map(sub, repeat(zi, len(z) - i - 1), z[i + 1:]):
        s += 1 / d
    return s


def _dk3_correct(lead, coeffs_rev, z, i, zi, bits, s_i=None):
    b, d = _horner_deriv(lead, coeffs_rev, zi)
    if b == 0:
        return zi
    for attempt in range(2):
        if d != 0:
            if s_i is None:
                if any(zi == zj for j, zj in enumerate(z) if j != i):
                    raise _Coincident(i)
                s_i = _inverse_sum(z, i, zi)
            n_i = b / d
            den = 1 - n_i * s_i
            if den != 0:
                return zi - n_i / den
        if attempt == 0:
            zi = zi + gmpy2.mul_2exp(mpc(1, 1), -(bits // 2))
            s_i = None
            b, d = _horner_deriv(lead, coeffs_rev, zi)
            if b == 0:
                return zi
    raise SingularDerivativeError(i)


def _update_block(order, poly, z, indices, mode, bits, sums=None):
    """New values for ``indices``; reads ``z`` (snapshot) and, in gauss-seidel, writes it."""
    lead, coeffs_rev = poly
    out = []
    for i in indices:
        zi = z[i]
        if order == 2:
            new = _dk2_correct(coeffs_rev, z, i, zi)
        else:
            new = _dk3_correct(lead, coeffs_rev, z, i, zi, bits, None if sums is None else sums[i])
        if mode == "gauss-seidel":
            z[i] = new
        out.append(new)
    return out


def _poly_payload(order, p_or_q):
    if order == 2:
        return None, tuple(reversed(p_or_q.coeffs))
    return p_or_q.coeffs[-1], tuple(reversed(p_or_q.coeffs[:-1]))


def _sweep(order, payload, values, frozen, mode, ctx, pool=None, threads=1):
    """One full sweep; returns the new list of values (input list untouched)."""
    active = [i for i, f in enumerate(frozen) if not f]
    new = list(values)
    if not active:
        return new
    if pool is None or threads == 1 or len(active) < 2 * threads:
        work = list(values)
        with ctx.active():
            sums = None
            if order == 3 and mode == "jacobi":
                sums = _pair_inverse_sums(work, [not f for f in frozen])
            upd = _update_block(order, payload, work, active, mode, ctx.bits, sums)
    else:
        size, extra = divmod(len(active), threads)
        blocks, start = [], 0
        for t in range(threads):
            stop = start + size + (1 if t < extra else 0)
            blocks.append(active[start:stop])
            start = stop
        futures = [pool.submit(_worker_block, values, b, mode) for b in blocks]
        upd = [v for f in futures for v in f.result()]
    for i, v in zip(active, upd):
        new[i] = v
    return new


_WORKER = {}


def _worker_init(order, payload, bits):
    _WORKER.update(order=order, payload=payload, ctx=PrecisionContext(bits))


def _worker_block(values, indices, mode):
    ctx = _WORKER["ctx"]
    with ctx.active():
        return _update_block(_WORKER["order"], _WORKER["payload"], list(values), indices, mode, ctx.bits)


def _step(order, p_or_q, z: RootVector, mode: str) -> RootVector:
    if mode not in MODES:
        raise ValueError(f"update_mode must be one of {MODES}")
    ctx = z.ctx
    values = list(z.values)
    payload = _poly_payload(order, p_or_q.at(ctx) if isinstance(p_or_q, Polynomial) else p_or_q)
    while True:
        try:
            new = _sweep(order, payload, values, z.frozen, mode, ctx)
            break
        except _Coincident:
            separate(values, z.frozen, ctx)
    return RootVector(tuple(new), ctx, z.frozen, z.k + 1)


def dk2_step(q: MonicPolynomial, z: RootVector, mode: str = "jacobi") -> RootVector:
    """z_i <- z_i - q(z_i) / prod_{j != i} (z_i - z_j); frozen entries are copied."""
    if q.ctx != z.ctx:
        q = MonicPolynomial(tuple(convert(c, z.ctx) for c in q.coeffs), z.ctx)
    return _step(2, q, z, mode)


def dk3_step(p: Polynomial, z: RootVector, mode: str = "jacobi") -> RootVector:
    """z_i <- z_i - N_i / (1 - N_i S_i), N_i = p/p'(z_i), S_i = sum_{j != i} 1/(z_i - z_j)."""
    return _step(3, p, z, mode)


# --- stopping rule ----------------------------------------------------------------

def check_converged(z_prev: RootVector, z_next: RootVector, cfg: SolveConfig) -> tuple[list, bool]:
    """Root i passes when |z_next_i - z_prev_i| <= eps_rel |z_prev_i| + eps_abs."""
    if len(z_prev) != len(z_next):
        raise ValueError("root vectors differ in length")
    ctx = z_next.ctx
    eps_rel, eps_abs = cfg.tolerances(ctx)
    with ctx.active():
        flags = [abs(b - a) <= eps_rel * abs(a) + eps_abs for a, b in zip(z_prev.values, z_next.values)]
    return flags, all(flags)


# --- driver -------------------------------------------------------------------------

def _as_root_vector(init, ctx: PrecisionContext) -> RootVector:
    if isinstance(init, InitialGuessSet):
        vals = [convert(g, ctx) for g in init.guesses]
        separate(vals, [False] * len(vals), ctx)
        return RootVector(tuple(vals), ctx)
    if isinstance(init, RootVector):
        if init.ctx == ctx:
            return init
        return replace(init, values=tuple(convert(v, ctx) for v in init.values), ctx=ctx)
    return RootVector.of(init, ctx)


def solve(p: Polynomial, init, cfg: SolveConfig) -> SolveResult:
    """Iterate DK sweeps at p's precision until every root meets the stopping rule.

    Roots freeze once they pass the rule but keep entering the other roots'
    corrections.  ``iterations`` counts full sweeps.
    """
    ctx = p.ctx
    z = _as_root_vector(init, ctx)
    if len(z) != p.degree:
        raise ValueError(f"{len(z)} initial values for a degree-{p.degree} polynomial")
    order = cfg.order
    payload = _poly_payload(order, make_monic(p) if order == 2 else p)
    eps_rel, eps_abs = cfg.tolerances(ctx)
    values = list(z.values)
    frozen = list(z.frozen)
    n = len(values)
    # roots frozen on entry keep a zero step; every other entry is set by the first sweep
    steps = [ctx.real(0)] * n
    separate(values, frozen, ctx)

    pool = None
    if cfg.threads > 1:
        pool = ProcessPoolExecutor(cfg.threads, initializer=_worker_init, initargs=(order, payload, ctx.bits))
        # spin workers up outside the timed loop
        list(pool.map(abs, range(cfg.threads)))
    sweeps = 0
    try:
        t0 = time.perf_counter()
        while sweeps < cfg.max_iter and not all(frozen):
            try:
                new = _sweep(order, payload, values, frozen, cfg.update_mode, ctx, pool, cfg.threads)
            except _Coincident:
                separate(values, frozen, ctx)
                continue
            sweeps += 1
            with ctx.active():
                for i in range(n):
                    if frozen[i]:
                        continue
                    if not is_finite(new[i]):
                        raise DivergenceError(i, sweeps)
                    step = abs(new[i] - values[i])
                    steps[i] = step
                    if step <= eps_rel * abs(values[i]) + eps_abs:
                        frozen[i] = True
            values = new
        wall = time.perf_counter() - t0
    finally:
        if pool is not None:
            pool.shutdown()
    roots = RootVector(tuple(values), ctx, tuple(frozen), sweeps)
    return SolveResult(roots, sweeps, all(frozen), tuple(steps), wall)

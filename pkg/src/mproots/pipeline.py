"""Mixed-precision pipeline, error-vs-reference protocol and the benchmark runner."""

from __future__ import annotations

import logging
import math
import statistics
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import gmpy2
from gmpy2 import mpc, mpfr

from .dk import RootVector, SolveConfig, SolveResult, aberth_init, solve
from .eigen import NonConvergenceError, eigen_roots
from .fileio import load_polynomial, store_roots
from .polynomial import (
    Polynomial,
    ReferenceRoots,
    chebyshev_poly,
    make_monic,
    wilkinson,
    wilkinson_bits,
)
from .scalar import PrecisionContext, convert, sci

log = logging.getLogger(__name__)

FAMILIES = ("wilkinson", "chebyshev", "file")
REFERENCE_BITS = 2048
REFERENCE_SEED_BITS = 512
# extra bits for the final polish; covers the coefficient cancellation of n <= 256
REFERENCE_POLISH_BITS = 512
ERROR_FLOOR = "1e-300"


class ReferenceCheckError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    family: str
    n: int = 0
    coeff_bits: int = 256
    path: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.family == "file":
            if not self.path:
                raise ValueError("file family needs a path")
        elif self.n < 1:
            raise ValueError("n must be >= 1")
        if self.coeff_bits < 24:
            raise ValueError("coeff_bits must be >= 24")

    def build(self) -> Polynomial:
        """Coefficients generated (or loaded) at ``coeff_bits``."""
        ctx = PrecisionContext(self.coeff_bits)
        if self.family == "wilkinson":
            return wilkinson(self.n, ctx)[0]
        if self.family == "chebyshev":
            return chebyshev_poly(self.n, ctx)
        p = load_polynomial(self.path)
        return p.at(ctx) if p.ctx.bits != self.coeff_bits else p

    @property
    def label(self) -> str:
        return self.path if self.family == "file" else f"{self.family}({self.n})"


def default_coeff_bits(family: str, n: int, high_bits: int) -> int:
    """Coefficient precision paired with a working precision.

    Chebyshev coefficients use half the DK precision (256 for 512, 512 for
    1024); Wilkinson coefficients are exact integers, so use at least what
    they need.
    """
    if family == "chebyshev":
        return max(24, high_bits // 2)
    if family == "wilkinson":
        return max(high_bits, wilkinson_bits(n))
    return high_bits


def default_eps_rel(bits: int) -> str:
    if bits == 512:
        return "8.6e-68"
    if bits == 1024:
        return "7.5e-145"
    return sci(mpfr(2) ** (-0.47 * bits), 4)


@dataclass(frozen=True)
class ErrorReport:
    per_root: tuple
    matching: tuple  # matching[i] = reference index paired with approximation i

    @property
    def max(self):
        return max(self.per_root)

    @property
    def median(self):
        return statistics.median(self.per_root)

    def digits(self) -> float:
        """Correct decimal digits of the worst root."""
        m = self.max
        return math.inf if m == 0 else -float(gmpy2.log10(m))


def match_and_errors(approx, ref: ReferenceRoots) -> ErrorReport:
    """Greedy nearest matching; relative error |z - a| / max(|a|, 1e-300).

    Approximations are placed in ascending order of their distance to the
    nearest reference root, each taking the nearest reference still free.
    """
    values = approx.values if isinstance(approx, RootVector) else tuple(approx)
    refs = ref.roots
    if len(values) != len(refs):
        raise ValueError("approximation and reference sizes differ")
    bits = max(ref.ctx.bits, max(z.precision[0] for z in values))
    ctx = PrecisionContext(bits)
    n = len(values)
    with ctx.active():
        dist = [[abs(mpc(z) - a) for a in refs] for z in values]
        order = sorted(range(n), key=lambda i: min(dist[i]))
        used = [False] * n
        matching = [0] * n
        errors = [mpfr(0)] * n
        floor = mpfr(ERROR_FLOOR)
        for i in order:
            j = min((k for k in range(n) if not used[k]), key=lambda k: dist[i][k])
            used[j] = True
            matching[i] = j
            errors[i] = dist[i][j] / max(abs(refs[j]), floor)
    return ErrorReport(tuple(errors), tuple(matching))


def root_product_check(p: Polynomial, roots, bits: int) -> bool:
    """prod(-z_i) against the monic constant term, to 2^(-bits/2) relative."""
    ctx = PrecisionContext(bits)
    q = make_monic(p.at(ctx))
    with ctx.active():
        prod = mpc(1)
        for z in roots:
            prod *= -z
        c0 = q.coeffs[0]
        tol = gmpy2.mul_2exp(mpfr(1), -(bits // 2))
        if c0 == 0:
            return abs(prod) <= tol
        return abs(prod - c0) <= tol * abs(c0)


@lru_cache(maxsize=16)
def reference_roots(spec: ProblemSpec) -> ReferenceRoots:
    """Analytic roots for Wilkinson; otherwise a 2048-bit order-3 DK solve.

    The Chebyshev reference is computed from coefficients generated at the
    reference precision itself, i.e. it is a reference for the exact problem.
    Ill-conditioned roots lose bits to the rounding of those coefficients, so
    the converged roots get a final order-3 polish with coefficients carried
    ``REFERENCE_POLISH_BITS`` higher, then are rounded back.
    """
    ref_ctx = PrecisionContext(REFERENCE_BITS)
    if spec.family == "wilkinson":
        return ReferenceRoots(tuple(ref_ctx.complex(i) for i in range(1, spec.n + 1)), ref_ctx, "analytic")
    polish_ctx = PrecisionContext(REFERENCE_BITS + REFERENCE_POLISH_BITS)
    if spec.family == "chebyshev":
        p = chebyshev_poly(spec.n, ref_ctx)
        p_polish = chebyshev_poly(spec.n, polish_ctx)
    else:
        p = load_polynomial(spec.path).at(ref_ctx)
        p_polish = load_polynomial(spec.path).at(polish_ctx)
    try:
        seeds = eigen_roots(p, PrecisionContext(REFERENCE_SEED_BITS))
    except NonConvergenceError:
        seeds = aberth_init(p)
    cfg = SolveConfig(eps_rel=str(mpfr(2) ** -1800), eps_abs="1e-600", order=3, max_iter=2000)
    res = solve(p, seeds, cfg)
    if not res.converged:
        raise ReferenceCheckError(f"reference solve for {spec.label} did not converge")
    polish_cfg = SolveConfig(eps_rel=str(mpfr(2) ** -(REFERENCE_BITS + 64)), eps_abs="1e-700", order=3, max_iter=20)
    polished = solve(p_polish, res.roots.values, polish_cfg)
    if not polished.converged:
        raise ReferenceCheckError(f"reference polish for {spec.label} did not converge")
    roots = tuple(convert(z, ref_ctx) for z in polished.roots.values)
    if not root_product_check(p, roots, REFERENCE_BITS):
        raise ReferenceCheckError(f"reference roots for {spec.label} fail the root-product check")
    return ReferenceRoots(roots, ref_ctx, "high-precision-solve")


def mixed_precision_solve(spec: ProblemSpec, low: PrecisionContext, high: PrecisionContext, cfg: SolveConfig) -> SolveResult:
    """Generate at L bits, eigenvalues at ``low``, DK at ``high`` seeded by them."""
    if low.bits > high.bits:
        raise ValueError("low precision must not exceed high precision")
    p = spec.build()
    t0 = time.perf_counter()
    fallback = False
    try:
        seeds = eigen_roots(p, low)
    except NonConvergenceError as exc:
        log.warning("eigensolver failed at %d bits (%s); falling back to Aberth start", low.bits, exc)
        seeds = None
        fallback = True
    seed_seconds = time.perf_counter() - t0
    ph = p.at(high)
    res = solve(ph, seeds if seeds is not None else aberth_init(ph), cfg)
    res.seed = "aberth" if fallback else "eigen-low"
    res.seed_seconds = seed_seconds
    res.seed_fallback = fallback
    if fallback:
        res.notes.append("eigensolver did not converge; Aberth seeds used")
    return res


# --- benchmark matrix -------------------------------------------------------------

CSV_COLUMNS = ("family", "n", "method", "low_bits", "high_bits", "threads", "sweeps", "wall_seconds", "max_rel_err", "converged")


@dataclass(frozen=True)
class BenchCase:
    spec: ProblemSpec
    method: str
    low_bits: int
    high_bits: int
    cfg: SolveConfig


@dataclass
class BenchRow:
    family: str
    n: int
    method: str
    low_bits: int
    high_bits: int
    threads: int
    sweeps: int
    wall_seconds: float
    max_rel_err: object
    converged: bool
    error: str = ""
    roots_path: str | None = None

    def csv_values(self) -> list:
        err = "nan" if self.max_rel_err is None else sci(self.max_rel_err, 7)
        return [self.family, self.n, self.method, self.low_bits, self.high_bits, self.threads,
                self.sweeps, f"{self.wall_seconds:.6f}", err, "true" if self.converged else "false"]


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)


def solve_method(spec: ProblemSpec, method: str, low_bits: int, high_bits: int, cfg: SolveConfig) -> SolveResult:
    """Run one of the five methods; ``eigen`` reports QR sweeps as its iteration count."""
    high = PrecisionContext(high_bits)
    if method == "eigen":
        p = spec.build()
        t0 = time.perf_counter()
        g = eigen_roots(p, high)
        wall = time.perf_counter() - t0
        return SolveResult(RootVector(g.guesses, high), g.sweeps, True, (high.real(0),) * len(g), wall, "eigen")
    if method not in ("dka2", "dka3", "dk2+low", "dk3+low"):
        raise ValueError(f"unknown method {method!r}")
    order = 3 if method in ("dka3", "dk3+low") else 2
    if cfg.order != order:
        cfg = replace(cfg, order=order)
    if method.endswith("+low"):
        return mixed_precision_solve(spec, PrecisionContext(low_bits), high, cfg)
    p = spec.build().at(high)
    return solve(p, aberth_init(p), cfg)


def run_benchmark(matrix: list, roots_dir=None) -> BenchReport:
    """Run every configuration in order; failures become non-converged rows."""
    if not matrix:
        raise ValueError("benchmark matrix is empty")
    report = BenchReport()
    for idx, case in enumerate(matrix):
        spec = case.spec
        row = BenchRow(spec.family, spec.n, case.method, case.low_bits, case.high_bits,
                       case.cfg.threads, 0, 0.0, None, False)
        try:
            res = solve_method(spec, case.method, case.low_bits, case.high_bits, case.cfg)
            row.sweeps, row.wall_seconds, row.converged = res.iterations, res.wall_seconds, res.converged
            row.max_rel_err = match_and_errors(res.roots, reference_roots(spec)).max
            if roots_dir is not None:
                path = Path(roots_dir) / f"row{idx:03d}_{spec.family}{spec.n}_{case.method}.roots"
                store_roots(path, res.roots.values, res.steps, case.high_bits, case.method, res.iterations, res.converged)
                row.roots_path = str(path)
        except Exception as exc:  # recorded in the row, the matrix keeps going
            log.error("row %d (%s %s) failed: %s", idx, spec.label, case.method, exc)
            row.converged = False
            row.error = f"{type(exc).__name__}: {exc}"
        report.rows.append(row)
    return report


def parse_matrix(text: str, source="<matrix>") -> list:
    """Config lines: ``family n method low_bits high_bits eps_rel eps_abs mode threads``."""
    from .fileio import METHODS, ParseError

    cases = []
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 9:
            raise ParseError(source, no, f"expected 9 fields, got {len(parts)}")
        family, n, method, low, high, eps_rel, eps_abs, mode, threads = parts
        if method not in METHODS:
            raise ParseError(source, no, f"unknown method {method!r}")
        try:
            n, low, high, threads = int(n), int(low), int(high), int(threads)
            mpfr(eps_rel), mpfr(eps_abs)
            if family == "file":
                raise ValueError("file family is not supported in matrix files")
            spec = ProblemSpec(family, n, default_coeff_bits(family, n, high))
            cfg = SolveConfig(eps_rel, eps_abs, order=3 if "3" in method else 2, update_mode=mode, threads=threads)
        except ValueError as exc:
            raise ParseError(source, no, str(exc)) from None
        cases.append(BenchCase(spec, method, low, high, cfg))
    return cases


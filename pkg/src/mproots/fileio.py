"""Flat-file formats: coefficient files, roots files and their CSV sidecars."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from gmpy2 import mpc, mpfr

from .polynomial import KINDS, Polynomial
from .scalar import PrecisionContext, format_real, parse_real, precision_of, sci

METHODS = ("dka2", "dka3", "dk2+low", "dk3+low", "eigen")


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class RootsFile:
    roots: tuple
    steps: tuple
    bits: int
    method: str
    iterations: int
    converged: bool

    @property
    def degree(self) -> int:
        return len(self.roots)

    @property
    def ctx(self) -> PrecisionContext:
        return PrecisionContext(self.bits)


def _parse_header(path, line: str, magic: str, keys: tuple) -> dict:
    parts = line.split()
    if len(parts) < 2 or parts[0] != magic or parts[1] != "v1":
        raise ParseError(path, 1, f"expected header '{magic} v1 ...', got {line.strip()!r}")
    fields = {}
    for item in parts[2:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParseError(path, 1, f"malformed header field {item!r}")
        fields[key] = value
    missing = [k for k in keys if k not in fields]
    if missing:
        raise ParseError(path, 1, f"header lacks {', '.join(missing)}")
    return fields


def _int_field(path, fields, key):
    try:
        return int(fields[key])
    except ValueError:
        raise ParseError(path, 1, f"{key} must be an integer, got {fields[key]!r}") from None


def store_polynomial(path, p: Polynomial) -> None:
    lines = [f"poly v1 degree={p.degree} bits={p.ctx.bits} kind={p.kind}"]
    lines += [format_real(a, p.ctx.bits) for a in p.coeffs]
    Path(path).write_text("\n".join(lines) + "\n")


def load_polynomial(path) -> Polynomial:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ParseError(path, 1, "empty file")
    fields = _parse_header(path, text[0], "poly", ("degree", "bits", "kind"))
    degree = _int_field(path, fields, "degree")
    bits = _int_field(path, fields, "bits")
    kind = fields["kind"]
    if kind not in KINDS:
        raise ParseError(path, 1, f"unknown kind {kind!r}")
    body = [(no, ln) for no, ln in enumerate(text[1:], start=2) if ln.strip()]
    if len(body) != degree + 1:
        raise ParseError(path, len(text), f"degree={degree} needs {degree + 1} coefficients, found {len(body)}")
    ctx = PrecisionContext(bits)
    coeffs = []
    for no, ln in body:
        try:
            a = parse_real(ln)
        except ValueError as exc:
            raise ParseError(path, no, str(exc)) from None
        coeffs.append(mpfr(a, bits))
    try:
        return Polynomial(tuple(coeffs), ctx, kind)
    except ValueError as exc:
        raise ParseError(path, len(text), str(exc)) from None


def store_roots(path, roots, steps, bits: int, method: str, iterations: int, converged: bool) -> None:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    lines = [
        f"roots v1 degree={len(roots)} bits={bits} method={method} "
        f"iterations={iterations} converged={'true' if converged else 'false'}"
    ]
    for i, (z, s) in enumerate(zip(roots, steps)):
        lines.append(f"{i} {format_real(z.real, bits)} {format_real(z.imag, bits)} {format_real(s, bits)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_roots(path) -> RootsFile:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ParseError(path, 1, "empty file")
    fields = _parse_header(path, text[0], "roots", ("degree", "bits", "method", "iterations", "converged"))
    degree = _int_field(path, fields, "degree")
    bits = _int_field(path, fields, "bits")
    iterations = _int_field(path, fields, "iterations")
    if fields["method"] not in METHODS:
        raise ParseError(path, 1, f"unknown method {fields['method']!r}")
    if fields["converged"] not in ("true", "false"):
        raise ParseError(path, 1, "converged must be true or false")
    body = [(no, ln) for no, ln in enumerate(text[1:], start=2) if ln.strip()]
    if len(body) != degree:
        raise ParseError(path, len(text), f"degree={degree} needs {degree} roots, found {len(body)}")
    ctx = PrecisionContext(bits)
    roots, steps = [], []
    for expect, (no, ln) in enumerate(body):
        parts = ln.split()
        if len(parts) != 4:
            raise ParseError(path, no, "expected 'index re im step'")
        if parts[0] != str(expect):
            raise ParseError(path, no, f"expected index {expect}, got {parts[0]!r}")
        try:
            re, im, step = (parse_real(x) for x in parts[1:])
        except ValueError as exc:
            raise ParseError(path, no, str(exc)) from None
        with ctx.active():
            roots.append(mpc(re, im))
        steps.append(mpfr(step, bits))
    return RootsFile(tuple(roots), tuple(steps), bits, fields["method"], iterations, fields["converged"] == "true")


def _sig(x, digits=40) -> str:
    return sci(x, digits)


def store_result(path, result, report=None, method: str = "dka2") -> Path:
    """Write the roots file plus ``<path>.csv`` (index,re,im,rel_err at 40 significant digits)."""
    roots = result.roots.values
    bits = precision_of(roots[0])
    store_roots(path, roots, result.steps, bits, method, result.iterations, result.converged)
    sidecar = Path(str(path) + ".csv")
    errors = report.per_root if report is not None else None
    with open(sidecar, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im", "rel_err"])
        for i, z in enumerate(roots):
            w.writerow([i, _sig(z.real), _sig(z.imag), _sig(errors[i]) if errors is not None else ""])
    return sidecar

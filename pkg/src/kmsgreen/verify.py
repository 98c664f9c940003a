"""Numerical audits of positivity, invariance and boundedness.

Positivity is checked on supplied finite families only: the Gram matrix of
the family is assembled, symmetrized and diagonalized.  Nothing here
certifies positivity for all families.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kernel import Argument, DeltaComb, MatsubaraSeries, ThermalCircle
from .spectral import Dispersion, spectral_pairing

DEFAULT_TOL = 1e-10
_ASYMMETRY_LIMIT = 1e-10
_SUPPORT_SAMPLES = 1024


class SupportError(ValueError):
    """A reflection-positivity profile is not supported in ``[0, beta/2]``."""


@dataclass
class GramReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    verdict: str
    tolerance: float
    asymmetry: float
    witness: np.ndarray | None = None

    @property
    def psd(self) -> bool:
        return self.verdict == "psd"

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def to_record(self, full: bool = True) -> dict:
        rec = {
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "asymmetry": self.asymmetry,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": float(self.eigenvalues[-1]),
            "size": int(self.matrix.shape[0]),
        }
        if full:
            rec["eigenvalues"] = [float(v) for v in self.eigenvalues]
        if self.witness is not None:
            rec["witness"] = [[float(z.real), float(z.imag)] for z in self.witness]
        return rec


def gram_report(matrix, tol: float = DEFAULT_TOL) -> GramReport:
    """Eigenvalue verdict for ``sum conj(c_a) c_b M_ab >= 0``.

    ``psd`` iff ``lambda_min >= -tol * max(1, lambda_max)``.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError("Gram matrix must be square and nonempty")
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    asym = float(np.linalg.norm(a - a.conj().T) / scale)
    if asym >= _ASYMMETRY_LIMIT:
        raise ValueError(f"matrix is not Hermitian (relative asymmetry {asym:.3e})")
    h = (a + a.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    ok = vals[0] >= -tol * max(1.0, vals[-1])
    return GramReport(
        matrix=h,
        eigenvalues=vals,
        verdict="psd" if ok else "indefinite",
        tolerance=tol,
        asymmetry=asym,
        witness=None if ok else vecs[:, 0],
    )


def _assemble(entry: Callable[[int, int], complex], n: int) -> np.ndarray:
    out = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[i, j] = entry(i, j)
    return out


def check_half_circle(x: Argument, circle: ThermalCircle) -> None:
    """Require every profile of ``x`` to vanish outside ``[0, beta/2]``."""
    half = circle.beta / 2
    for p, _ in x.terms:
        if isinstance(p, DeltaComb):
            if np.any(p.taus < 0) or np.any(p.taus > half):
                raise SupportError(f"delta comb times {p.taus} leave [0, beta/2]")
        elif isinstance(p, MatsubaraSeries):
            tau = np.linspace(-half, half, _SUPPORT_SAMPLES, endpoint=False)
            outside = tau < 0
            if np.any(np.abs(p(tau[outside], circle)) >= 1e-12):
                raise SupportError("series profile does not vanish on [-beta/2, 0)")
        else:
            raise TypeError(f"unknown profile type {type(p).__name__}")


def s_positivity(functional, family: Sequence[Argument], tol: float = DEFAULT_TOL) -> GramReport:
    """Gram matrix ``G(x_a - x_b)``."""
    if not family:
        raise ValueError("family must be nonempty")
    return gram_report(_assemble(lambda i, j: functional(family[i] - family[j]), len(family)), tol)


def reflection_positivity(functional, family: Sequence[Argument], circle: ThermalCircle,
                          tol: float = DEFAULT_TOL) -> GramReport:
    """Gram matrix ``G(x_a - R x_b)`` with ``(R psi)(tau) = psi(-tau)``."""
    if not family:
        raise ValueError("family must be nonempty")
    for x in family:
        check_half_circle(x, circle)
    reflected = [x.reflected(circle) for x in family]
    return gram_report(_assemble(lambda i, j: functional(family[i] - reflected[j]), len(family)), tol)


def kernel_positivity(kernel, family: Sequence[Argument], tol: float = DEFAULT_TOL,
                      reflect: bool = False) -> GramReport:
    """``B(x_a, x_b)`` or, with ``reflect``, ``B(x_a, R x_b)`` on half-circle profiles."""
    if not family:
        raise ValueError("family must be nonempty")
    if reflect:
        for x in family:
            check_half_circle(x, kernel.circle)
        others = [x.reflected(kernel.circle) for x in family]
    else:
        others = list(family)
    return gram_report(_assemble(lambda i, j: kernel(family[i], others[j]), len(family)), tol)


class CorruptedKernel:
    """Negative control: flips the sign of every off-diagonal Gram entry."""

    def __init__(self, base):
        self.base = base
        self.circle = base.circle

    def __call__(self, x: Argument, y: Argument) -> complex:
        value = self.base(x, y)
        return value if x is y else -value


@dataclass
class InvarianceReport:
    shift_deviation: float
    reflection_deviation: float
    periodicity_deviation: float
    tolerance: float
    shifts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return max(self.shift_deviation, self.reflection_deviation, self.periodicity_deviation) < self.tolerance

    def to_record(self) -> dict:
        return {
            "shift_deviation": self.shift_deviation,
            "reflection_deviation": self.reflection_deviation,
            "periodicity_deviation": self.periodicity_deviation,
            "tolerance": self.tolerance,
            "n_shifts": len(self.shifts),
            "passed": self.passed,
        }


def invariance_audit(model, points, shifts: Sequence[float], circle: ThermalCircle,
                     tol: float = 1e-11) -> InvarianceReport:
    """Compare ``G`` at ``points`` with shifted, reflected and ``beta``-translated copies."""
    base = model.multitime(points)

    def dev(pts):
        return float(abs(model.multitime(pts) - base))

    shift_dev = max((dev([(t + s, f) for t, f in points]) for s in shifts), default=0.0)
    refl_dev = dev([(-t, f) for t, f in points])
    per_dev = max(dev([(t + circle.beta, f) for t, f in points]),
                  dev([(t - circle.beta, f) for t, f in points]))
    return InvarianceReport(shift_dev, refl_dev, per_dev, tol, list(shifts))


@dataclass
class BoundednessReport:
    ratios: np.ndarray
    supremum: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(self.supremum <= self.bound * (1 + 1e-12))

    def to_record(self) -> dict:
        return {"supremum": self.supremum, "bound": self.bound, "passed": self.passed, "n_pairs": int(self.ratios.size)}


def sobolev_norm(f, disp: Dispersion) -> float:
    """``||f||_{-1} = <f, h^-1 f>^(1/2)``."""
    return float(np.sqrt(spectral_pairing(f, f, lambda lam: 1.0 / lam, disp).real))


def _argument_norm(x: Argument, disp: Dispersion, circle: ThermalCircle) -> float:
    (p, f), = x.terms
    return p.time_norm(circle) * sobolev_norm(f, disp)


def boundedness_constant(x: Argument, disp: Dispersion, circle: ThermalCircle) -> float:
    """Constant ``C`` with ``B(x, x) <= C ||psi||^2 ||f||_{-1}^2`` for a single-term argument.

    Series profiles (``L^2`` time norm): ``2 lambda / (lambda^2 + omega^2) <= 2 / lambda``
    gives ``C = 2``.  Delta combs (total-variation norm): ``|K_lambda(t)| <= coth(beta lambda / 2)``
    gives ``C = max_k lambda coth(beta lambda / 2)`` over the grid, which grows with
    the momentum cutoff.
    """
    (p, f), = x.terms
    if isinstance(p, MatsubaraSeries):
        return 2.0
    lam = disp(f.k)
    return float(np.max(lam / np.tanh(circle.beta * lam / 2)))


def boundedness_probe(kernel, pairs: Sequence[tuple[Argument, Argument]], disp: Dispersion) -> BoundednessReport:
    """Empirical supremum of ``|B(x, y)| / (||x|| ||y||)`` over single-term argument pairs.

    ``||psi (x) f|| = ||psi||_time ||f||_{-1}``.  A zero norm gives ratio 0.  The
    bound is the geometric mean of :func:`boundedness_constant` of both
    arguments, maximized over pairs (Cauchy-Schwarz for the positive form ``B``).
    """
    circle = kernel.circle
    ratios = []
    bound = 0.0
    for x, y in pairs:
        nx, ny = _argument_norm(x, disp, circle), _argument_norm(y, disp, circle)
        ratios.append(0.0 if nx == 0 or ny == 0 else abs(kernel(x, y)) / (nx * ny))
        bound = max(bound, np.sqrt(boundedness_constant(x, disp, circle) * boundedness_constant(y, disp, circle)))
    ratios = np.asarray(ratios)
    return BoundednessReport(ratios, float(np.max(ratios, initial=0.0)), float(bound))

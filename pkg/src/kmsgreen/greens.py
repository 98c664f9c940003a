"""Green functionals, multitime Green functions and Schwinger moments.

Three models share one interface (``green``, ``multitime``, ``moment``,
``gaussian_parts``):

* :class:`QuasiFreeSpec` -- ``G(x) = exp(i M(x)) exp(-B(x, x) / 2)`` with ``B``
  the free kernel at one chemical potential, or the measure-averaged kernel (the
  generalized free functional, see :func:`generalized_free`);
* :class:`Mixture` -- ``G(x) = sum_i w_i exp(-B_i(x, x) / 2)`` with ``B_i``
  the free kernel at ``mu_i``, a convex combination of free functionals.

Multitime points are ``(tau, f)`` pairs with arbitrary real ``tau``; the kernel
is periodic, so no wrapping is needed there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, lgamma, log
from typing import Sequence

import numpy as np

from .cumulants import double_factorial, gaussian_moment, subsets
from .kernel import (
    Argument,
    FreeKernel,
    MixedKernel,
    SpectralMeasure,
    ThermalCircle,
)
from .spectral import Dispersion, TestFunction, pairing_weights

Point = tuple  # (tau, TestFunction)


class QuasiFreeSpec:
    """Quasi-free functional with covariance ``kernel`` and optional mean.

    The mean is represented by a test function ``m``:
    ``M(psi (x) f) = (int psi) <m, f>``, which is shift and reflection
    invariant.
    """

    def __init__(self, kernel: FreeKernel | MixedKernel, mean: TestFunction | None = None):
        self.kernel = kernel
        self.mean = mean

    @classmethod
    def free(cls, disp: Dispersion, circle: ThermalCircle, mean: TestFunction | None = None) -> "QuasiFreeSpec":
        return cls(FreeKernel(disp, circle), mean)

    @property
    def circle(self) -> ThermalCircle:
        return self.kernel.circle

    def _mean_of(self, f: TestFunction) -> complex:
        if self.mean is None:
            return 0j
        return complex(np.sum(pairing_weights(self.mean, f)))

    def mean_value(self, x: Argument) -> complex:
        return sum((p.integral(self.circle) * self._mean_of(f) for p, f in x.terms), 0j)

    def green(self, x: Argument) -> complex:
        quad = self.kernel(x, x).real
        return complex(np.exp(1j * self.mean_value(x) - 0.5 * quad))

    __call__ = green

    def covariance(self, points: Sequence[Point]) -> np.ndarray:
        s = self.kernel.point_matrix(points)
        # the characteristic function only sees the symmetric part
        return (s + s.T) / 2

    def means(self, points: Sequence[Point]) -> np.ndarray:
        return np.array([self._mean_of(f) for _, f in points], dtype=complex)

    def gaussian_parts(self, points: Sequence[Point]) -> list[tuple[float, np.ndarray, np.ndarray | None]]:
        mean = self.means(points) if self.mean is not None else None
        return [(1.0, self.covariance(points), mean)]

    def multitime(self, points: Sequence[Point]) -> complex:
        cov = self.covariance(points)
        phase = np.sum(self.means(points)) if self.mean is not None else 0.0
        return complex(np.exp(1j * phase - 0.5 * np.sum(cov)))

    def moment(self, points: Sequence[Point]) -> complex:
        return _moment_from_parts(self.gaussian_parts(points))


class Mixture:
    """Weighted average of mean-zero free functionals over an atomic measure."""

    def __init__(self, measure: SpectralMeasure, kind: str, circle: ThermalCircle):
        self.measure = measure
        self.kind = kind
        self.circle = circle
        self.components = [
            (w, QuasiFreeSpec.free(Dispersion(kind, mu), circle)) for mu, w in measure.atoms
        ]

    def green(self, x: Argument) -> complex:
        return sum(w * c.green(x) for w, c in self.components)

    __call__ = green

    def multitime(self, points: Sequence[Point]) -> complex:
        return sum(w * c.multitime(points) for w, c in self.components)

    def gaussian_parts(self, points: Sequence[Point]):
        return [(w, c.covariance(points), None) for w, c in self.components]

    def moment(self, points: Sequence[Point]) -> complex:
        return _moment_from_parts(self.gaussian_parts(points))


def generalized_free(measure: SpectralMeasure, kind: str, circle: ThermalCircle) -> QuasiFreeSpec:
    """Quasi-free functional ``exp(-B(x, x) / 2)`` with ``B`` the measure-averaged kernel."""
    return QuasiFreeSpec(MixedKernel(measure, kind, circle))


def _moment_from_parts(parts, index: Sequence[int] | None = None) -> complex:
    total = 0j
    for w, cov, mean in parts:
        if index is not None:
            ix = np.asarray(index, dtype=int)
            cov = cov[np.ix_(ix, ix)]
            mean = None if mean is None else mean[ix]
        total += w * gaussian_moment(cov, mean)
    return total


# --------------------------------------------------------------------------
# module-level entry points


def quasifree_green(spec: QuasiFreeSpec, arg: Argument) -> complex:
    return spec.green(arg)


def multitime_green(spec: QuasiFreeSpec, points: Sequence[Point]) -> complex:
    """Gaussian characteristic function ``exp(i sum M_i - sum_{i,j} S_ij / 2)``."""
    if not points:
        raise ValueError("need at least one point")
    return spec.multitime(points)


def mixture_green(measure: SpectralMeasure, kind: str, circle: ThermalCircle, arg: Argument) -> complex:
    return Mixture(measure, kind, circle).green(arg)


def generalized_free_green(measure: SpectralMeasure, kind: str, circle: ThermalCircle, arg: Argument) -> complex:
    return generalized_free(measure, kind, circle).green(arg)


def mixture_multitime(measure: SpectralMeasure, kind: str, circle: ThermalCircle, points: Sequence[Point]) -> complex:
    if not points:
        raise ValueError("need at least one point")
    return Mixture(measure, kind, circle).multitime(points)


def schwinger_moment(model, points: Sequence[Point]) -> complex:
    """``E prod_a X_a`` for the coordinates ``X_a`` at ``(tau_a, f_a)``, by Wick summation (per atom for mixtures)."""
    if not points:
        raise ValueError("need at least one point")
    return model.moment(points)


def subset_moments(model, points: Sequence[Point]) -> dict:
    """Moments of every nonempty sub-collection of ``points``, keyed by index ``frozenset``.

    The covariance of the full collection is computed once.
    """
    parts = model.gaussian_parts(points)
    return {frozenset(sub): _moment_from_parts(parts, sub) for sub in subsets(len(points))}


def moment_by_differentiation(model, points: Sequence[Point], step: float = 0.05,
                              levels: int = 4) -> complex:
    """``i^-n d^n/dt_1..dt_n G((tau_1, t_1 f_1), ...)`` at ``t = 0`` by finite differences.

    Central differences in every variable, Richardson-extrapolated over step
    sizes ``step, step/2, ...`` (``levels`` of them).  An independent route to
    :func:`schwinger_moment`.
    """
    n = len(points)
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T
    parity = np.prod(signs, axis=1)

    def central(h):
        total = 0j
        for s, par in zip(signs, parity):
            scaled = [(tau, (h * si) * f) for (tau, f), si in zip(points, s)]
            total += par * model.multitime(scaled)
        return total / (2 * h) ** n

    table = [central(step / 2**j) for j in range(levels)]
    # error expansion in even powers of the step
    for order in range(1, levels):
        fac = 4.0**order
        table = [(fac * table[j + 1] - table[j]) / (fac - 1) for j in range(len(table) - 1)]
    return table[0] / (1j) ** n


# --------------------------------------------------------------------------
# tables and growth probe


@dataclass
class SchwingerTable:
    """One n-point value of flavor ``green``, ``schwinger`` or ``truncated``."""

    order: int
    points: list
    value: complex
    flavor: str = "schwinger"

    def __post_init__(self):
        if self.flavor not in ("green", "schwinger", "truncated"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if not np.isfinite(self.value):
            raise ValueError("table value must be finite")

    def to_record(self) -> dict:
        return {
            "order": self.order,
            "flavor": self.flavor,
            "taus": [float(t) for t, _ in self.points],
            "value": [float(np.real(self.value)), float(np.imag(self.value))],
        }


def equal_argument_moments(variances: Sequence[float], weights: Sequence[float] | None = None,
                           orders: Sequence[int] = range(2, 17, 2)) -> dict:
    """``sum_i w_i (n-1)!! a_i^(n/2)``: moments of a (mixture of) centred Gaussian(s)."""
    variances = np.atleast_1d(np.asarray(variances, dtype=float))
    weights = np.ones_like(variances) if weights is None else np.asarray(weights, dtype=float)
    return {
        n: float(np.sum(weights * double_factorial(n - 1) * variances ** (n / 2))) if n % 2 == 0 else 0.0
        for n in orders
    }


@dataclass
class GrowthReport:
    gamma: float
    constant: float
    rate: float
    fit_orders: list
    check_orders: list
    residual: float
    ratios: dict = field(default_factory=dict)
    holds: bool = False

    def to_record(self) -> dict:
        return {
            "gamma": self.gamma,
            "C": self.constant,
            "R": self.rate,
            "fit_orders": self.fit_orders,
            "check_orders": self.check_orders,
            "fit_residual_rms_log": self.residual,
            "max_ratio_on_check_orders": max(self.ratios[n] for n in self.check_orders),
            "holds": self.holds,
        }


def growth_probe(moments: dict, gamma: float = 0.6, fit_orders: Sequence[int] | None = None) -> GrowthReport:
    """Fit ``|S_n| <= C (n!)^gamma R^n`` on low orders and test it on the rest.

    ``log|S_n| - gamma log n!`` is fitted linearly in ``n`` by least squares on
    ``fit_orders`` (default: the lower half of the nonzero orders); ``C`` is then
    raised to the envelope over the fit orders.  ``holds`` reports whether the
    fitted bound still covers every remaining order.
    """
    orders = sorted(n for n, v in moments.items() if abs(v) > 0)
    if len(orders) < 3:
        raise ValueError("need at least three nonzero orders")
    if fit_orders is None:
        fit_orders = orders[: (len(orders) + 1) // 2]
    fit_orders = sorted(fit_orders)
    check = [n for n in orders if n not in fit_orders]
    y = np.array([log(abs(moments[n])) - gamma * lgamma(n + 1) for n in fit_orders])
    x = np.array(fit_orders, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    log_c = intercept + max(0.0, float(np.max(resid)))
    rate = float(np.exp(slope))
    ratios = {
        n: float(abs(moments[n]) / (np.exp(log_c) * factorial(n) ** gamma * rate**n)) for n in orders
    }
    return GrowthReport(
        gamma=gamma,
        constant=float(np.exp(log_c)),
        rate=rate,
        fit_orders=list(fit_orders),
        check_orders=check,
        residual=float(np.sqrt(np.mean(resid**2))),
        ratios=ratios,
        holds=all(ratios[n] <= 1.0 for n in orders),
    )

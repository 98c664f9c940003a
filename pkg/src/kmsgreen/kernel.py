"""Free Bose thermal covariance on the circle of circumference beta.

For a spectral value ``h > 0`` the Euclidean-time covariance is

    K_h(t) = (exp(-|t| h) + exp(-(beta - |t|) h)) / (1 - exp(-beta h))
           = cosh(h (beta/2 - |t|)) / sinh(beta h / 2),        |t| <= beta,

with Matsubara coefficients ``2h / (h^2 + omega_n^2)``, ``omega_n = 2 pi n / beta``.
The operator kernel is obtained by applying ``K`` to the dispersion through
:func:`kmsgreen.spectral.spectral_pairing`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import mpmath
import numpy as np

from .spectral import Dispersion, TestFunction, pairing_weights

# Above this value of beta*h cosh/sinh overflow; use the exponential form.
_EXP_BRANCH = 1.0  # beta*h above which the exponential form is used


@dataclass(frozen=True)
class ThermalCircle:
    """Euclidean time circle ``[-beta/2, beta/2)`` with endpoints identified."""

    beta: float

    def __post_init__(self):
        beta = float(self.beta)
        if not np.isfinite(beta) or beta <= 0:
            raise ValueError(f"beta must be finite and > 0, got {self.beta!r}")
        object.__setattr__(self, "beta", beta)

    def wrap(self, tau):
        """Representative of ``tau`` in ``[-beta/2, beta/2)``."""
        b = self.beta
        out = np.mod(np.asarray(tau, dtype=float) + b / 2, b) - b / 2
        return out

    def frequencies(self, n_max: int) -> np.ndarray:
        return 2 * np.pi * np.arange(-n_max, n_max + 1) / self.beta


def _reduce_time(t, beta):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("time arguments must be finite")
    return np.where(np.abs(t) > beta, np.fmod(t, beta), t)


def _covariance(h, t, beta):
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        raise ValueError("spectral value h must be finite and > 0")
    a = np.abs(_reduce_time(t, beta))
    bh = beta * h
    small = bh <= _EXP_BRANCH
    hs = np.where(small, h, 1.0)
    hyper = np.cosh(hs * (beta / 2 - a)) / np.sinh(beta * hs / 2)
    # away from small beta*h the decaying-exponential form is a few ulps more
    # accurate than the hyperbolic ratio and cannot overflow
    with np.errstate(under="ignore"):
        expo = (np.exp(-a * h) + np.exp(-(beta - a) * h)) / -np.expm1(-bh)
    return np.where(small, hyper, expo)


def covariance_scalar(h, t, circle: ThermalCircle):
    """Thermal covariance ``K_h(t)`` at spectral value ``h`` (vectorized).

    ``t`` is any real time; values outside ``[-beta, beta]`` are reduced
    modulo ``beta`` first.
    """
    out = _covariance(h, t, circle.beta)
    return float(out) if out.ndim == 0 else out


def matsubara_coefficient(h, omega):
    """Fourier coefficient ``2 h / (h^2 + omega^2)`` of ``K_h``."""
    h = np.asarray(h, dtype=float)
    return 2 * h / (h * h + omega * omega)


def matsubara_covariance(h: float, t: float, beta: float, n_modes: int = 100_000,
                         resum_order: int = 1, dps: int | None = None) -> float:
    """``K_h(t)`` summed as the Matsubara series ``(1/beta) sum_n 2h/(h^2+w_n^2) e^{i w_n t}``.

    Independent of the cosh/sinh closed form; used to cross-check it.

    Parameters
    ----------
    n_modes : int
        Modes ``|n| <= n_modes`` are summed explicitly.
    resum_order : int
        The leading ``resum_order`` terms of the large-``n`` expansion
        ``2h/(h^2+w^2) = sum_k (-1)^(k-1) 2 h^(2k-1) / w^(2k) + ...`` are summed
        over all ``n`` exactly with Bernoulli polynomials
        ``sum_{n>=1} cos(2 pi n x) / n^(2k) = (-1)^(k+1) (2 pi)^(2k) B_2k(x) / (2 (2k)!)``
        and only the remainder is truncated.  ``0`` gives the plain truncated
        sum, whose error at ``t = 0`` is about ``h beta / (pi^2 n_modes)``.
    dps : int, optional
        Decimal digits for an mpmath evaluation.  Needed when ``K_h(t)`` is
        many orders of magnitude below ``1/h`` (large ``h min(t, beta - t)``);
        the series terms are O(1) so double precision cannot resolve it.
        Modes whose remaining contribution is below ``10**-(dps - 10)`` are
        not visited.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if dps is None:
        return _matsubara_double(h, t, beta, n_modes, resum_order)
    return _matsubara_mp(h, t, beta, n_modes, resum_order, dps)


def _matsubara_double(h, t, beta, n_modes, resum_order):
    if resum_order not in (0, 1):
        raise ValueError("double precision path supports resum_order 0 or 1; pass dps for more")
    n = np.arange(1, n_modes + 1)
    w = 2 * np.pi * n / beta
    c = np.cos(w * t)
    if resum_order == 0:
        return (2 / h + 2 * np.sum(2 * h / (h * h + w * w) * c)) / beta
    x = (t / beta) % 1.0
    # sum over n != 0 of 2h cos(w t) / w^2
    head = 2 * h * (beta / (2 * np.pi)) ** 2 * 2 * np.pi**2 * (x * x - x + 1 / 6)
    rest = 2 * np.sum(2 * h**3 / (w * w * (h * h + w * w)) * c)
    return (2 / h + head - rest) / beta


def _matsubara_mp(h, t, beta, n_modes, resum_order, dps):
    with mpmath.workdps(dps):
        h = mpmath.mpf(h)
        beta = mpmath.mpf(beta)
        x = mpmath.mpf(t) / beta
        x -= mpmath.floor(x)
        scale = beta / (2 * mpmath.pi)  # omega_n = n / scale
        total = 2 / h
        for k in range(1, resum_order + 1):
            cos_sum = (-1) ** (k + 1) * (2 * mpmath.pi) ** (2 * k) * mpmath.bernpoly(2 * k, x) / mpmath.factorial(2 * k)
            total += 2 * (-1) ** (k - 1) * h ** (2 * k - 1) * scale ** (2 * k) * cos_sum
        # remainder (-1)^K 2 h^(2K+1) / (w^(2K) (h^2 + w^2)), both signs of n
        pref = 4 * (-1) ** resum_order * h ** (2 * resum_order + 1)
        tiny = mpmath.mpf(10) ** (-(dps - 10))
        cos1 = mpmath.cos(2 * mpmath.pi * x)
        c_prev, c_cur = mpmath.mpf(1), cos1
        h2 = h * h
        acc = mpmath.mpf(0)
        for n in range(1, n_modes + 1):
            w2 = (n / scale) ** 2
            envelope = 1 / (w2**resum_order * (h2 + w2))
            acc += c_cur * envelope
            if abs(pref * envelope) * n < tiny:
                break
            c_prev, c_cur = c_cur, 2 * cos1 * c_cur - c_prev
        total += pref * acc
        return float(total / beta)


# --------------------------------------------------------------------------
# time profiles


@dataclass(frozen=True, eq=False)
class DeltaComb:
    """``psi = sum_j weights[j] * delta_{taus[j]}``."""

    taus: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if taus.shape != weights.shape or taus.ndim != 1:
            raise ValueError("taus and weights must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(taus)) and np.all(np.isfinite(weights))):
            raise ValueError("delta comb entries must be finite")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def single(cls, tau: float, weight: float = 1.0) -> "DeltaComb":
        return cls([tau], [weight])

    def check_on(self, circle: ThermalCircle) -> None:
        half = circle.beta / 2
        if np.any(self.taus < -half) or np.any(self.taus >= half):
            raise ValueError(f"delta comb times must lie in [-beta/2, beta/2) = [{-half}, {half})")

    def scaled(self, a: float) -> "DeltaComb":
        return DeltaComb(self.taus, a * self.weights)

    def reflected(self, circle: ThermalCircle) -> "DeltaComb":
        return DeltaComb(circle.wrap(-self.taus), self.weights)

    def shifted(self, s: float, circle: ThermalCircle) -> "DeltaComb":
        return DeltaComb(circle.wrap(self.taus + s), self.weights)

    def integral(self, circle: ThermalCircle) -> float:
        return float(np.sum(self.weights))

    def time_norm(self, circle: ThermalCircle) -> float:
        """Total variation ``sum |w_j|`` of the measure."""
        return float(np.sum(np.abs(self.weights)))

    def to_record(self) -> dict:
        return {"delta": [[float(t), float(w)] for t, w in zip(self.taus, self.weights)]}


@dataclass(frozen=True, eq=False)
class MatsubaraSeries:
    """Real profile ``psi(tau) = sum_{|n| <= N} c_n exp(i omega_n tau)``.

    ``coeffs[N + n]`` holds ``c_n``; ``c_{-n} = conj(c_n)`` must hold exactly.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1 or c.size % 2 == 0:
            raise ValueError("coeffs must have odd length 2N+1 (modes -N..N)")
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        if not np.array_equal(c[::-1], np.conj(c)):
            raise ValueError("series must be real: c_{-n} == conj(c_n) exactly")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_positive(cls, c0: float, positive: Sequence[complex] = ()) -> "MatsubaraSeries":
        """Build from ``c_0`` (real) and ``c_1, ..., c_N``."""
        pos = np.asarray(positive, dtype=complex)
        c = np.concatenate([np.conj(pos[::-1]), [complex(float(c0))], pos])
        return cls(c)

    @property
    def n_max(self) -> int:
        return self.coeffs.size // 2

    def modes(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def __call__(self, tau, circle: ThermalCircle) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        om = circle.frequencies(self.n_max)
        return np.real(np.exp(1j * np.multiply.outer(tau, om)) @ self.coeffs)

    def scaled(self, a: float) -> "MatsubaraSeries":
        return MatsubaraSeries(a * self.coeffs)

    def reflected(self, circle: ThermalCircle) -> "MatsubaraSeries":
        return MatsubaraSeries(self.coeffs[::-1].copy())

    def shifted(self, s: float, circle: ThermalCircle) -> "MatsubaraSeries":
        # exact reality of the phases: build positive modes, mirror them
        om = 2 * np.pi * np.arange(1, self.n_max + 1) / circle.beta
        pos = self.coeffs[self.n_max + 1:] * np.exp(-1j * om * s)
        return MatsubaraSeries.from_positive(self.coeffs[self.n_max].real, pos)

    def integral(self, circle: ThermalCircle) -> float:
        return float(circle.beta * self.coeffs[self.n_max].real)

    def time_norm(self, circle: ThermalCircle) -> float:
        """``L^2`` norm on the circle, ``sqrt(beta sum |c_n|^2)``."""
        return float(np.sqrt(circle.beta * np.sum(np.abs(self.coeffs) ** 2)))

    def check_on(self, circle: ThermalCircle) -> None:
        pass

    def to_record(self) -> dict:
        return {"series": [[float(c.real), float(c.imag)] for c in self.coeffs]}


TimeProfile = Union[DeltaComb, MatsubaraSeries]


def profile_from_record(record: dict) -> TimeProfile:
    if "delta" in record:
        arr = np.asarray(record["delta"], dtype=float).reshape(-1, 2)
        return DeltaComb(arr[:, 0], arr[:, 1])
    if "series" in record:
        arr = np.asarray(record["series"], dtype=float).reshape(-1, 2)
        return MatsubaraSeries(arr[:, 0] + 1j * arr[:, 1])
    raise ValueError("profile record needs a 'delta' or 'series' key")


# --------------------------------------------------------------------------
# spectral measures


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Atomic measure ``sum_i w_i delta_{mu_i}`` supported in ``[floor, inf)``.

    ``normalized=False`` drops the requirement that weights sum to one.
    """

    atoms: tuple
    floor: float
    normalized: bool = True

    def __post_init__(self):
        atoms = tuple((float(mu), float(w)) for mu, w in self.atoms)
        floor = float(self.floor)
        if not atoms:
            raise ValueError("measure.atoms: at least one atom is required")
        if not np.isfinite(floor) or floor <= 0:
            raise ValueError(f"measure.floor: support floor e must be > 0, got {self.floor!r}")
        for i, (mu, w) in enumerate(atoms):
            if not (np.isfinite(mu) and np.isfinite(w)):
                raise ValueError(f"measure.atoms[{i}]: non-finite entry")
            if w <= 0:
                raise ValueError(f"measure.atoms[{i}]: weight must be > 0, got {w}")
            if mu < floor:
                raise ValueError(f"measure.atoms[{i}]: mu = {mu} lies below the support floor e = {floor}")
        if self.normalized and abs(sum(w for _, w in atoms) - 1.0) > 1e-12:
            raise ValueError("measure.atoms: weights must sum to 1 for a probability measure")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "floor", floor)

    @classmethod
    def dirac(cls, mu: float, floor: float | None = None) -> "SpectralMeasure":
        return cls(((mu, 1.0),), floor=mu if floor is None else floor)

    @classmethod
    def two_atom(cls, mu1: float, mu2: float, w1: float = 0.5, floor: float | None = None) -> "SpectralMeasure":
        return cls(((mu1, w1), (mu2, 1.0 - w1)), floor=min(mu1, mu2) if floor is None else floor)

    @property
    def mus(self) -> np.ndarray:
        return np.array([mu for mu, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def to_record(self) -> dict:
        return {"e": self.floor, "atoms": [[mu, w] for mu, w in self.atoms], "normalized": self.normalized}

    @classmethod
    def from_record(cls, record: dict) -> "SpectralMeasure":
        if "e" not in record:
            raise ValueError("measure.e: support floor is required")
        return cls(tuple(map(tuple, record.get("atoms", ()))), floor=record["e"],
                   normalized=bool(record.get("normalized", True)))


# --------------------------------------------------------------------------
# kernels


def kernel_sharp(t1: float, f1: TestFunction, t2: float, f2: TestFunction,
                 disp: Dispersion, circle: ThermalCircle) -> complex:
    """``S(delta_t1 (x) f1, delta_t2 (x) f2) = <f1, K_h(t1 - t2) f2>``."""
    pw = pairing_weights(f1, f2)
    return complex(np.sum(pw * _covariance(disp(f1.k), t1 - t2, circle.beta)))


def kernel_smeared(p1: TimeProfile, f1: TestFunction, p2: TimeProfile, f2: TestFunction,
                   disp: Dispersion, circle: ThermalCircle) -> complex:
    """``int ds int ds' psi1(s) psi2(s') <f1, K_h(s - s') f2>`` on the circle."""
    pw = pairing_weights(f1, f2)
    lam = disp(f1.k)
    beta = circle.beta
    p1.check_on(circle)
    p2.check_on(circle)
    if isinstance(p1, DeltaComb) and isinstance(p2, DeltaComb):
        t = np.subtract.outer(p1.taus, p2.taus)
        cov = _covariance(lam, t[..., None], beta) @ pw
        return complex(p1.weights @ cov @ p2.weights)
    if isinstance(p1, MatsubaraSeries) and isinstance(p2, MatsubaraSeries):
        n = min(p1.n_max, p2.n_max)
        c1 = p1.coeffs[p1.n_max - n: p1.n_max + n + 1]
        c2 = p2.coeffs[p2.n_max - n: p2.n_max + n + 1]
        om = circle.frequencies(n)
        spec = matsubara_coefficient(lam[None, :], om[:, None]) @ pw
        return complex(beta * np.sum(np.conj(c1) * c2 * spec))
    if isinstance(p1, DeltaComb):
        comb, series = p1, p2
    else:
        comb, series = p2, p1
    om = circle.frequencies(series.n_max)
    spec = matsubara_coefficient(lam[None, :], om[:, None]) @ pw
    phases = np.exp(1j * np.multiply.outer(comb.taus, om))
    return complex(comb.weights @ (phases @ (series.coeffs * spec)))


def kernel_mixed(p1: TimeProfile, f1: TestFunction, p2: TimeProfile, f2: TestFunction,
                 measure: SpectralMeasure, kind: str, circle: ThermalCircle) -> complex:
    """Weighted sum over atoms of :func:`kernel_smeared` at each ``mu_i``."""
    return sum(
        w * kernel_smeared(p1, f1, p2, f2, Dispersion(kind, mu), circle)
        for mu, w in measure.atoms
    )


# --------------------------------------------------------------------------
# arguments psi (x) f and their finite signed combinations


@dataclass(frozen=True, eq=False)
class Argument:
    """Finite combination ``sum_k psi_k (x) f_k`` of profile/test-function pairs."""

    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((p, f) for p, f in self.terms))

    @classmethod
    def of(cls, profile: TimeProfile, f: TestFunction) -> "Argument":
        return cls(((profile, f),))

    @classmethod
    def sharp(cls, points: Iterable[tuple[float, TestFunction]], circle: ThermalCircle) -> "Argument":
        """``sum_i delta_{tau_i} (x) f_i`` with times wrapped onto the circle."""
        return cls(tuple((DeltaComb.single(float(circle.wrap(tau))), f) for tau, f in points))

    def __add__(self, other: "Argument") -> "Argument":
        return Argument(self.terms + other.terms)

    def __neg__(self) -> "Argument":
        return Argument(tuple((p.scaled(-1.0), f) for p, f in self.terms))

    def __sub__(self, other: "Argument") -> "Argument":
        return self + (-other)

    def __rmul__(self, a: float) -> "Argument":
        return Argument(tuple((p.scaled(float(a)), f) for p, f in self.terms))

    def reflected(self, circle: ThermalCircle) -> "Argument":
        return Argument(tuple((p.reflected(circle), f) for p, f in self.terms))

    def shifted(self, s: float, circle: ThermalCircle) -> "Argument":
        return Argument(tuple((p.shifted(s, circle), f) for p, f in self.terms))

    def to_record(self) -> dict:
        return {"terms": [{"profile": p.to_record(), "f": f.to_record()} for p, f in self.terms]}


class FreeKernel:
    """The free covariance at one chemical potential, as a sesquilinear form on arguments."""

    def __init__(self, disp: Dispersion, circle: ThermalCircle):
        self.disp = disp
        self.circle = circle

    @property
    def components(self) -> list[tuple[float, "FreeKernel"]]:
        return [(1.0, self)]

    def __call__(self, x: Argument, y: Argument) -> complex:
        total = 0j
        combs_x = [(p, f) for p, f in x.terms if isinstance(p, DeltaComb)]
        combs_y = [(p, f) for p, f in y.terms if isinstance(p, DeltaComb)]
        grid = combs_x[0][1] if combs_x else None
        batched = grid is not None and combs_y and all(f.same_grid(grid) for _, f in combs_x + combs_y)
        if batched:
            total += self._comb_block(combs_x, combs_y)
        for p1, f1 in x.terms:
            for p2, f2 in y.terms:
                if batched and isinstance(p1, DeltaComb) and isinstance(p2, DeltaComb):
                    continue
                total += kernel_smeared(p1, f1, p2, f2, self.disp, self.circle)
        return total

    def _comb_block(self, xs, ys) -> complex:
        # all delta atoms of x against all of y on one shared grid
        def flatten(terms):
            for p, _ in terms:
                p.check_on(self.circle)
            taus = np.concatenate([p.taus for p, _ in terms])
            weights = np.concatenate([p.weights for p, _ in terms])
            values = np.concatenate([np.broadcast_to(f.v, (p.taus.size, f.size)) for p, f in terms])
            return taus, weights, values

        tx, wx, vx = flatten(xs)
        ty, wy, vy = flatten(ys)
        grid = xs[0][1]
        cov = _covariance(self.disp(grid.k), np.subtract.outer(tx, ty)[..., None], self.circle.beta)
        a = (wx[:, None] * np.conj(vx)) * grid.w
        b = wy[:, None] * vy
        return complex(np.einsum("ak,abk,bk->", a, cov, b))

    def sharp(self, t1, f1, t2, f2) -> complex:
        return kernel_sharp(t1, f1, t2, f2, self.disp, self.circle)

    def point_matrix(self, points: Sequence[tuple[float, TestFunction]]) -> np.ndarray:
        n = len(points)
        out = np.empty((n, n), dtype=complex)
        for i, (ti, fi) in enumerate(points):
            for j, (tj, fj) in enumerate(points):
                out[i, j] = kernel_sharp(ti, fi, tj, fj, self.disp, self.circle)
        return out


class MixedKernel:
    """Free kernels averaged over an atomic measure of chemical potentials."""

    def __init__(self, measure: SpectralMeasure, kind: str, circle: ThermalCircle):
        self.measure = measure
        self.kind = kind
        self.circle = circle
        self._parts = [(w, FreeKernel(Dispersion(kind, mu), circle)) for mu, w in measure.atoms]

    @property
    def components(self) -> list[tuple[float, FreeKernel]]:
        return list(self._parts)

    def __call__(self, x: Argument, y: Argument) -> complex:
        return sum(w * k(x, y) for w, k in self._parts)

    def sharp(self, t1, f1, t2, f2) -> complex:
        return sum(w * k.sharp(t1, f1, t2, f2) for w, k in self._parts)

    def point_matrix(self, points) -> np.ndarray:
        return sum(w * k.point_matrix(points) for w, k in self._parts)

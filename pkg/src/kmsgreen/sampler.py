"""Monte Carlo draws of finite-dimensional projections of the thermal process.

Draw ``i`` of a batch is a function of ``(seed, i)`` only: it reads a fixed
block of Philox output starting at counter ``i * blocks_per_draw``.  Slot 0 of
every draw is the uniform that selects a mixture atom (unused for a single
Gaussian), the remaining slots become standard normals by inverse-CDF.  So
any chunking gives identical draws, and a Dirac mixture reproduces
:func:`sample_gaussian` bit for bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special, stats

from .greens import QuasiFreeSpec
from .kernel import SpectralMeasure, ThermalCircle
from .spectral import Dispersion

_CLIP = 1e-12
_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter step


@dataclass
class SampleBatch:
    draws: np.ndarray
    seed: int
    model: dict
    atoms: np.ndarray | None = None
    chunk_size: int | None = None

    @property
    def size(self) -> int:
        return self.draws.shape[0]

    def header(self) -> dict:
        return {"seed": self.seed, "N": self.size, "n": int(self.draws.shape[1]), "model": self.model}

    def to_text(self, path) -> None:
        """Delimited text: one ``#``-prefixed JSON header line, then one draw per row."""
        np.savetxt(path, self.draws, delimiter=",", header=json.dumps(self.header(), sort_keys=True),
                   fmt="%.17g")

    def to_binary(self, path) -> None:
        """JSON header line terminated by ``\\n``, then little-endian float64 rows."""
        with open(path, "wb") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True).encode() + b"\n")
            fh.write(np.ascontiguousarray(self.draws, dtype="<f8").tobytes())

    @staticmethod
    def read_binary(path) -> tuple[dict, np.ndarray]:
        raw = Path(path).read_bytes()
        head, _, body = raw.partition(b"\n")
        header = json.loads(head)
        draws = np.frombuffer(body, dtype="<f8").reshape(header["N"], header["n"])
        return header, draws


def _factor(cov: np.ndarray) -> np.ndarray:
    """``F`` with ``F F^T = cov``; tiny negative eigenvalues clipped to zero."""
    cov = np.asarray(cov)
    if np.iscomplexobj(cov):
        if np.max(np.abs(cov.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise ValueError("covariance of the projected coordinates must be real")
        cov = cov.real
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2)
    top = max(vals[-1], 0.0) if vals.size else 0.0
    if vals.size and vals[0] < -_CLIP * max(top, np.finfo(float).tiny):
        raise ValueError(f"covariance is indefinite (lambda_min = {vals[0]:.3e}); kernel bug?")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _uniform_block(seed: int, start: int, count: int, width: int) -> np.ndarray:
    blocks = -(-width // _WORDS_PER_BLOCK)
    words = blocks * _WORDS_PER_BLOCK
    bitgen = np.random.Philox(key=seed)
    bitgen.advance(start * blocks)
    raw = bitgen.random_raw(count * words).reshape(count, words)[:, :width]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _gaussian_mixture_draws(factors, cum_weights, n: int, N: int, seed: int,
                            chunk_size: int | None) -> tuple[np.ndarray, np.ndarray]:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    draws = np.empty((N, n))
    atoms = np.empty(N, dtype=np.int64)
    step = N if not chunk_size else int(chunk_size)
    for start in range(0, N, max(step, 1)):
        count = min(step, N - start)
        u = _uniform_block(seed, start, count, n + 1)
        idx = np.searchsorted(cum_weights, u[:, 0], side="right")
        idx = np.minimum(idx, len(factors) - 1)
        z = special.ndtri(u[:, 1:])
        out = np.zeros((count, n))
        for a, fac in enumerate(factors):
            sel = idx == a
            zs = z[sel]
            # fixed-order sum instead of BLAS: a row must not depend on the chunk it sits in
            acc = np.zeros((zs.shape[0], n))
            for j in range(n):
                acc += zs[:, j, None] * fac[:, j]
            out[sel] = acc
        draws[start:start + count] = out
        atoms[start:start + count] = idx
    return draws, atoms


def _describe(points, extra: dict) -> dict:
    return {**extra, "taus": [float(t) for t, _ in points]}


def sample_gaussian(spec: QuasiFreeSpec, points: Sequence, N: int, seed: int,
                    chunk_size: int | None = None) -> SampleBatch:
    """``N`` draws of the coordinates at ``points`` under the centred Gaussian law of ``spec``."""
    if N < 0:
        raise ValueError("N must be >= 0")
    if spec.mean is not None:
        raise ValueError("sampling supports centred (mean-free) specs only")
    fac = _factor(spec.covariance(points))
    draws, _ = _gaussian_mixture_draws([fac], np.array([1.0]), len(points), N, seed, chunk_size)
    model = _describe(points, {"type": "gaussian", "kernel": type(spec.kernel).__name__})
    return SampleBatch(draws, seed, model, None, chunk_size)


def sample_mixture(measure: SpectralMeasure, kind: str, circle: ThermalCircle, points: Sequence,
                   N: int, seed: int, chunk_size: int | None = None) -> SampleBatch:
    """Draw an atom by weight, then a Gaussian draw at that atom's chemical potential."""
    if N < 0:
        raise ValueError("N must be >= 0")
    factors = [
        _factor(QuasiFreeSpec.free(Dispersion(kind, mu), circle).covariance(points))
        for mu, _ in measure.atoms
    ]
    w = measure.weights
    cum = np.cumsum(w / np.sum(w))
    draws, atoms = _gaussian_mixture_draws(factors, cum[:-1], len(points), N, seed, chunk_size)
    model = _describe(points, {"type": "mixture", "measure": measure.to_record(), "kind": kind,
                               "beta": circle.beta})
    return SampleBatch(draws, seed, model, atoms, chunk_size)


@dataclass
class Estimate:
    value: complex
    stderr: float

    def within(self, exact: complex, k: float = 4.0) -> bool:
        return bool(abs(self.value - exact) <= k * self.stderr)

    def to_record(self) -> dict:
        v = complex(self.value)
        return {"value": [v.real, v.imag], "stderr": self.stderr}


def _mean_estimate(samples: np.ndarray) -> Estimate:
    N = samples.shape[0]
    if N == 0:
        raise ValueError("empty batch")
    m = samples.mean()
    if N == 1:
        return Estimate(complex(m), float("inf"))
    var = np.sum(np.abs(samples - m) ** 2) / (N - 1)
    return Estimate(complex(m), float(np.sqrt(var / N)))


def empirical_green(batch: SampleBatch, coefficients: Sequence[float]) -> Estimate:
    """Mean and standard error of ``exp(i c . X)``."""
    c = np.asarray(coefficients, dtype=float)
    if c.shape != (batch.draws.shape[1],):
        raise ValueError(f"need {batch.draws.shape[1]} coefficients, got {c.shape}")
    if batch.size == 0:
        raise ValueError("empty batch")
    if not np.any(c):
        return Estimate(1 + 0j, 0.0)
    return _mean_estimate(np.exp(1j * (batch.draws @ c)))


def empirical_moment(batch: SampleBatch, index: Sequence[int]) -> Estimate:
    """Mean and standard error of ``prod_{i in index} X_i`` (repeats allowed)."""
    if batch.size == 0:
        raise ValueError("empty batch")
    prod = np.prod(batch.draws[:, list(index)], axis=1)
    est = _mean_estimate(prod)
    return Estimate(est.value.real, est.stderr)


def k_statistic(batch: SampleBatch, column: int = 0, order: int = 4, n_batches: int = 100) -> Estimate:
    """Unbiased cumulant estimate of one coordinate, with a batch-means standard error."""
    x = batch.draws[:, column]
    if x.size < 2 * n_batches:
        raise ValueError("batch too small for the batch-means error estimate")
    value = float(stats.kstat(x, order))
    parts = np.array([stats.kstat(chunk, order) for chunk in np.array_split(x, n_batches)])
    return Estimate(value, float(parts.std(ddof=1) / np.sqrt(n_batches)))

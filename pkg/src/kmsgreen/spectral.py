"""Momentum-space test functions and spectral pairings.

A spatial test function f is stored through its Fourier transform sampled on a
fixed quadrature grid.  Functions of the one-particle Hamiltonian act
diagonally there, so

    <f, g(h) f'> = sum_k w_k conj(f(k)) f'(k) g(lambda(k))

where ``lambda`` is the dispersion relation of ``h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

NONRELATIVISTIC = "nonrelativistic"
RELATIVISTIC = "relativistic"
_KINDS = (NONRELATIVISTIC, RELATIVISTIC)

MAX_DIM = 3


class GridMismatchError(ValueError):
    """Two test functions do not live on the same momentum grid."""


@dataclass(frozen=True)
class Dispersion:
    """One-particle dispersion ``lambda(k)``.

    ``nonrelativistic``: ``|k|^2 + mu``; ``relativistic``: ``sqrt(|k|^2 + mu^2)``.
    In both cases ``lambda(k) >= mu > 0``.
    """

    kind: str
    mu: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown dispersion kind {self.kind!r}; expected one of {_KINDS}")
        mu = float(self.mu)
        if not np.isfinite(mu) or mu <= 0:
            raise ValueError(f"mu must be finite and > 0, got {self.mu!r}")
        object.__setattr__(self, "mu", mu)

    def __call__(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        k2 = np.sum(k * k, axis=-1)
        if self.kind == NONRELATIVISTIC:
            return k2 + self.mu
        return np.sqrt(k2 + self.mu * self.mu)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Fourier samples ``v`` of a test function at nodes ``k`` with weights ``w``.

    Parameters
    ----------
    k : (n, dim) array
        Node momenta, pairwise distinct.
    w : (n,) array
        Strictly positive quadrature weights.
    v : (n,) complex array
        Values of the Fourier transform at the nodes.
    real : bool
        Declare the function real in position space.  This is checked: every
        node ``k`` must have a partner ``-k`` carrying ``conj(v)``.
    """

    __test__ = False  # keep pytest from collecting this class

    k: np.ndarray
    w: np.ndarray
    v: np.ndarray
    real: bool = False
    _partner: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.k, dtype=float))
        w = np.asarray(self.w, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=complex).reshape(-1)
        if k.shape[0] != w.size or w.size != v.size:
            raise ValueError("k, w and v must describe the same number of nodes")
        if k.shape[1] < 1 or k.shape[1] > MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {k.shape[1]}")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise ValueError("test function data must be finite")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be strictly positive")
        if np.unique(k, axis=0).shape[0] != k.shape[0]:
            raise ValueError("node momenta must be distinct")
        for name, arr in (("k", k), ("w", w), ("v", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.real:
            partner = _mirror_index(k)
            if partner is None or not np.allclose(v[partner], np.conj(v), rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(v), initial=0.0))):
                raise ValueError("real test function needs v(-k) = conj(v(k)) on a symmetric grid")
            object.__setattr__(self, "_partner", partner)

    @property
    def dim(self) -> int:
        return self.k.shape[1]

    @property
    def size(self) -> int:
        return self.w.size

    def norm2(self) -> float:
        return float(np.sum(self.w * np.abs(self.v) ** 2))

    def same_grid(self, other: "TestFunction") -> bool:
        if self.k is other.k and self.w is other.w:
            return True
        return (
            self.k.shape == other.k.shape
            and np.array_equal(self.k, other.k)
            and np.array_equal(self.w, other.w)
        )

    def with_values(self, v, real: bool | None = None) -> "TestFunction":
        """Same grid, new Fourier values."""
        if real is None:
            real = False
        return TestFunction(self.k, self.w, v, real=real)

    def __mul__(self, scalar) -> "TestFunction":
        scalar = complex(scalar)
        return self.with_values(self.v * scalar, real=self.real and scalar.imag == 0)

    __rmul__ = __mul__

    def __neg__(self) -> "TestFunction":
        return self * -1.0

    def __add__(self, other: "TestFunction") -> "TestFunction":
        _require_same_grid(self, other)
        return self.with_values(self.v + other.v, real=self.real and other.real)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + (-other)

    def to_record(self) -> dict:
        """Plain-data form: ``{"dim", "real", "nodes": [[k..., w, re v, im v], ...]}``."""
        nodes = [
            [*map(float, kk), float(ww), float(vv.real), float(vv.imag)]
            for kk, ww, vv in zip(self.k, self.w, self.v)
        ]
        return {"dim": self.dim, "real": bool(self.real), "nodes": nodes}

    @classmethod
    def from_record(cls, record: dict) -> "TestFunction":
        dim = int(record["dim"])
        nodes = np.asarray(record["nodes"], dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != dim + 3:
            raise ValueError(f"each node needs {dim + 3} numbers (k..., w, re, im)")
        return cls(
            nodes[:, :dim],
            nodes[:, dim],
            nodes[:, dim + 1] + 1j * nodes[:, dim + 2],
            real=bool(record.get("real", False)),
        )


def _mirror_index(k: np.ndarray) -> np.ndarray | None:
    scale = max(1.0, float(np.max(np.abs(k), initial=0.0)))
    keys = {tuple(np.round(row / scale, 12) + 0.0): i for i, row in enumerate(k)}
    out = np.empty(k.shape[0], dtype=int)
    for i, row in enumerate(k):
        j = keys.get(tuple(np.round(-row / scale, 12) + 0.0))
        if j is None:
            return None
        out[i] = j
    return out


def _require_same_grid(f: TestFunction, g: TestFunction) -> None:
    if f.dim != g.dim:
        raise GridMismatchError(f"dimension mismatch: {f.dim} vs {g.dim}")
    if not f.same_grid(g):
        raise GridMismatchError("test functions live on different momentum grids")


def single_node(value: complex = 1.0, dim: int = 1, weight: float = 1.0) -> TestFunction:
    """One node at ``k = 0``: the zero-momentum mode with ``w |v|^2 = weight |value|^2``."""
    value = complex(value)
    return TestFunction(np.zeros((1, dim)), [weight], [value], real=value.imag == 0)


def trapezoid_axis(n_nodes: int, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and trapezoid weights on ``[-cutoff, cutoff]``.

    A single node is placed at the origin with unit weight.
    """
    if n_nodes == 1:
        return np.zeros(1), np.ones(1)
    x = np.linspace(-cutoff, cutoff, n_nodes)
    step = x[1] - x[0]
    w = np.full(n_nodes, step)
    w[0] = w[-1] = step / 2
    return x, w


def gaussian_packet(
    dim: int,
    center: Sequence[float] | float = 0.0,
    width: float = 1.0,
    n_nodes: int | None = None,
    cutoff: float | None = None,
) -> TestFunction:
    """Normalized Gaussian packet ``exp(-|k - center|^2 / (4 width^2))``.

    Defaults: ``cutoff = 8 width + |center|``; ``n_nodes`` per axis is 129 in
    one dimension, 65 in two and 33 in three.  With ``center = 0`` the packet is
    real in position space.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    if dim > MAX_DIM:
        raise ValueError(f"dim > {MAX_DIM} is not supported (grid has n_nodes**dim points)")
    center = np.broadcast_to(np.asarray(center, dtype=float), (dim,)).copy()
    width = float(width)
    if not (np.all(np.isfinite(center)) and np.isfinite(width)) or width <= 0:
        raise ValueError("center must be finite and width finite and > 0")
    if n_nodes is None:
        n_nodes = {1: 129, 2: 65, 3: 33}[dim]
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if cutoff is None:
        cutoff = 8 * width + float(np.linalg.norm(center))
    cutoff = float(cutoff)
    if not np.isfinite(cutoff) or cutoff < 0 or (cutoff == 0 and n_nodes > 1):
        raise ValueError("cutoff must be finite and > 0")

    x, wx = trapezoid_axis(n_nodes, cutoff)
    mesh = np.meshgrid(*([x] * dim), indexing="ij")
    k = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([wx] * dim), indexing="ij")
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    v = np.exp(-np.sum((k - center) ** 2, axis=-1) / (4 * width**2))
    v = v / np.sqrt(np.sum(w * v * v))
    return TestFunction(k, w, v.astype(complex), real=not np.any(center))


def spectral_pairing(
    f: TestFunction,
    g: TestFunction,
    phi: Callable[[np.ndarray], np.ndarray],
    disp: Dispersion,
) -> complex:
    """``<f, phi(h) g>`` evaluated on the shared momentum grid."""
    _require_same_grid(f, g)
    values = np.asarray(phi(disp(f.k)), dtype=float)
    values = np.broadcast_to(values, (f.size,))
    if not np.all(np.isfinite(values)):
        raise ValueError("phi is not finite at every grid eigenvalue")
    return complex(np.sum(f.w * np.conj(f.v) * g.v * values))


def pairing_weights(f: TestFunction, g: TestFunction) -> np.ndarray:
    """Node-wise products ``w conj(f) g``; contract with ``phi(lambda)`` to pair."""
    _require_same_grid(f, g)
    return f.w * np.conj(f.v) * g.v


def common_grid(functions: Iterable[TestFunction]) -> TestFunction:
    functions = list(functions)
    if not functions:
        raise ValueError("no test functions given")
    first = functions[0]
    for other in functions[1:]:
        _require_same_grid(first, other)
    return first

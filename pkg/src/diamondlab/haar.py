"""Reproducible Haar-random unitaries.

Generator choice: numpy's counter-based Philox bit generator, keyed by a
``SeedSequence`` built from ``(seed, stream_id)``. Substreams are derived by
mixing the parent stream id with the substream index through SplitMix64, so
``derive_substream`` is a pure function and every Monte Carlo sample can be
regenerated on its own, in any order, on any thread.

Complex Gaussians come from Box-Muller on uniform doubles; Haar unitaries
from a Ginibre matrix, QR, and the R-diagonal phase correction.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .matrix_core import DimensionError

MASK64 = (1 << 64) - 1
SEED_ENV = "DIAMONDLAB_SEED"


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class SeededRng:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & MASK64)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))


def default_seed(fallback: int = 0) -> int:
    return int(os.environ.get(SEED_ENV, fallback))


def derive_substream(rng: SeededRng, index: int) -> SeededRng:
    mixed = splitmix64(rng.stream_id ^ splitmix64(int(index) & MASK64))
    return SeededRng(rng.seed, mixed)


def complex_gaussians(gen: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normals (E|z|^2 = 1) via Box-Muller."""
    u1 = 1.0 - gen.random(shape)  # (0, 1]
    u2 = gen.random(shape)
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def haar_unitary(gen: np.random.Generator, d: int) -> np.ndarray:
    """Draw one d x d Haar unitary from an already constructed generator."""
    if d < 1:
        raise DimensionError("unitary dimension must be >= 1")
    z = complex_gaussians(gen, (d, d))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def sample_haar_unitary(d: int, rng: SeededRng) -> np.ndarray:
    return haar_unitary(rng.generator(), d)


def random_hermitian(gen: np.random.Generator, d: int, frobenius: float | None = None) -> np.ndarray:
    """GUE-like Hermitian matrix, optionally rescaled to a fixed Frobenius norm."""
    z = complex_gaussians(gen, (d, d))
    h = (z + z.conj().T) / 2
    if frobenius is not None:
        h *= frobenius / np.linalg.norm(h)
    return h


def random_pure_state(gen: np.random.Generator, d: int) -> np.ndarray:
    v = complex_gaussians(gen, d)
    return v / np.linalg.norm(v)


def random_density_matrix(gen: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    g = complex_gaussians(gen, (d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def monte_carlo(
    fn: Callable[[np.random.Generator], object],
    rng: SeededRng,
    samples: int,
    workers: int = 1,
) -> np.ndarray:
    """Evaluate ``fn`` once per substream ``0..samples-1``.

    Results come back in substream order whatever ``workers`` is, so any
    reduction over them is independent of scheduling.
    """
    def one(i: int):
        return fn(derive_substream(rng, i).generator())

    if workers <= 1:
        out = [one(i) for i in range(samples)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, range(samples)))
    return np.asarray(out)


def exact_mean(values) -> float:
    """Correctly rounded mean; identical for any ordering of ``values``."""
    values = np.asarray(values, dtype=float).ravel()
    return math.fsum(values) / len(values)

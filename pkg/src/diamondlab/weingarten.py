"""First and second Haar moments by Weingarten calculus, with a Monte Carlo oracle.

Only orders n = 1, 2 are supported. Weingarten values are exact rationals,
converted to float at the end.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .haar import SeededRng, haar_unitary, monte_carlo
from .matrix_core import DimensionError


class UnsupportedOrder(NotImplementedError):
    pass


class WeingartenPole(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Permutation:
    """Permutation of {1..n}, stored as the image tuple of 0..n-1."""

    image: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.image) != list(range(len(self.image))):
            raise ValueError(f"not a permutation: {self.image}")

    @property
    def n(self) -> int:
        return len(self.image)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, cycles: Sequence[Sequence[int]]) -> "Permutation":
        img = list(range(n))
        seen: set[int] = set()
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                if a in seen or not 1 <= a <= n:
                    raise ValueError(f"bad cycle structure {cycles}")
                seen.add(a)
                img[a - 1] = b - 1
        return cls(tuple(img))

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "Permutation":
        """Parse cycle notation such as ``"(12)"`` or ``"(1)(2)"``."""
        cycles = [[int(c) for c in grp] for grp in re.findall(r"\(([0-9]+)\)", text)]
        if not cycles:
            raise ValueError(f"cannot parse permutation {text!r}")
        size = n or max(max(c) for c in cycles)
        return cls.from_cycles(size, cycles)

    def __call__(self, i: int) -> int:
        return self.image[i]

    def __mul__(self, other: "Permutation") -> "Permutation":
        # (self * other)(i) = self(other(i))
        if self.n != other.n:
            raise ValueError("size mismatch")
        return Permutation(tuple(self.image[other.image[i]] for i in range(self.n)))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.image):
            inv[j] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list[tuple[int, ...]]:
        """Cycles with 1-based labels, each starting at its smallest element."""
        seen, out = set(), []
        for start in range(self.n):
            if start in seen:
                continue
            cyc, i = [], start
            while i not in seen:
                seen.add(i)
                cyc.append(i + 1)
                i = self.image[i]
            out.append(tuple(cyc))
        return out

    def cycle_type(self) -> tuple[int, ...]:
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))

    def __str__(self):
        return "".join("(" + "".join(map(str, c)) + ")" for c in self.cycles())


def all_permutations(n: int) -> list[Permutation]:
    return [Permutation(p) for p in itertools.permutations(range(n))]


def long_cycle(n: int) -> Permutation:
    return Permutation(tuple((i + 1) % n for i in range(n)))


def wg_exact(pi: Permutation, d: int) -> Fraction:
    if pi.n == 1:
        return Fraction(1, d)
    if pi.n == 2:
        if d < 2:
            raise WeingartenPole("Wg for n = 2 has a pole at d = 1")
        if pi.cycle_type() == (1, 1):
            return Fraction(1, d * d - 1)
        return Fraction(-1, d * (d * d - 1))
    raise UnsupportedOrder(f"Weingarten function of order {pi.n} not implemented")


def wg(pi: Permutation, d: int) -> float:
    return float(wg_exact(pi, d))


def permuted_trace(sigma: Permutation, mats: Sequence[np.ndarray]) -> complex:
    """Product over the cycles of sigma of the trace of the cycle-ordered product."""
    if len(mats) != sigma.n:
        raise DimensionError(f"need {sigma.n} matrices, got {len(mats)}")
    mats = [np.asarray(m) for m in mats]
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise DimensionError("permuted_trace needs square matrices of one size")
    out = 1.0 + 0j
    for cyc in sigma.cycles():
        prod = mats[cyc[0] - 1]
        for i in cyc[1:]:
            prod = prod @ mats[i - 1]
        out *= np.trace(prod)
    return complex(out)


def _check_moment_args(a, b, d):
    n = len(a)
    if n != len(b):
        raise DimensionError("A and B lists must have equal length")
    if n not in (1, 2):
        raise UnsupportedOrder(f"closed-form Haar moments only for n in (1, 2), got {n}")
    for m in list(a) + list(b):
        if np.shape(m) != (d, d):
            raise DimensionError(f"operator shape {np.shape(m)} != ({d}, {d})")
    return n


def haar_moment_closed_form(a: Sequence[np.ndarray], b: Sequence[np.ndarray], d: int) -> complex:
    """E Tr(U B_1 U^dag A_1 ... U B_n U^dag A_n) over Haar U in U(d)."""
    n = _check_moment_args(a, b, d)
    gamma = long_cycle(n)
    total = 0j
    for alpha in all_permutations(n):
        ta = permuted_trace(alpha * gamma, a)
        for beta in all_permutations(n):
            w = wg(beta * alpha.inverse(), d)
            total += w * permuted_trace(beta.inverse(), b) * ta
    return complex(total)


def haar_word(u: np.ndarray, a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> complex:
    ud = u.conj().T
    prod = np.eye(u.shape[0], dtype=complex)
    for ai, bi in zip(a, b):
        prod = prod @ u @ bi @ ud @ ai
    return complex(np.trace(prod))


def mc_haar_moment(
    a: Sequence[np.ndarray],
    b: Sequence[np.ndarray],
    d: int,
    samples: int,
    rng: SeededRng,
    workers: int = 1,
) -> tuple[complex, float]:
    """Sample mean of the Haar word and its (complex) standard error."""
    _check_moment_args(a, b, d)
    if samples < 100:
        raise ValueError("mc_haar_moment needs at least 100 samples")
    a = [np.asarray(m, complex) for m in a]
    b = [np.asarray(m, complex) for m in b]
    vals = monte_carlo(lambda g: haar_word(haar_unitary(g, d), a, b), rng, samples, workers)
    est = complex(vals.mean())
    var = (np.var(vals.real, ddof=1) + np.var(vals.imag, ddof=1)) / samples
    return est, float(np.sqrt(var))

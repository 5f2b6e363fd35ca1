"""Per-node physical process: finite Markov chain and range-survival probabilities.

States are 1-indexed at the public surface (``RangeQuery``, JSON) and 0-indexed
in every array.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse.csgraph import connected_components

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``M x M`` matrix of a per-node process.

    ``stationary_hint`` lets a constructor supply the stationary distribution
    of a degenerate limit (the frozen ``q = 0`` chain), in which case the
    irreducibility check is skipped.
    """

    entries: np.ndarray
    stationary_hint: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        z = np.array(self.entries, dtype=float)
        if z.ndim != 2 or z.shape[0] != z.shape[1] or z.shape[0] < 1:
            raise ValueError(f"transition matrix must be square, got shape {z.shape}")
        if np.any(z < 0) or np.any(z > 1):
            raise ValueError("transition matrix entries must lie in [0, 1]")
        rows = z.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > ROW_SUM_TOL):
            bad = int(np.argmax(np.abs(rows - 1.0)))
            raise ValueError(f"row {bad + 1} sums to {rows[bad]!r}, not 1")
        if self.stationary_hint is None and not is_irreducible(z):
            raise ValueError("transition matrix is not irreducible")
        z.setflags(write=False)
        object.__setattr__(self, "entries", z)
        if self.stationary_hint is not None:
            pi = np.array(self.stationary_hint, dtype=float)
            pi.setflags(write=False)
            object.__setattr__(self, "stationary_hint", pi)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def to_json(self) -> str:
        return json.dumps(self.entries.tolist())

    @classmethod
    def from_json(cls, text: str) -> "TransitionMatrix":
        return cls(np.array(json.loads(text), dtype=float))


@dataclass(frozen=True)
class RangeQuery:
    """Closed interval ``[lower, upper]`` of 1-indexed states."""

    lower: int
    upper: int

    def __post_init__(self):
        if not 1 <= self.lower <= self.upper:
            raise ValueError(f"invalid range [{self.lower}, {self.upper}]")

    def check(self, M: int) -> None:
        if self.upper > M:
            raise ValueError(f"range [{self.lower}, {self.upper}] exceeds M={M}")

    def mask(self, M: int) -> np.ndarray:
        """Boolean membership vector over 0-indexed states."""
        self.check(M)
        m = np.zeros(M, dtype=bool)
        m[self.lower - 1:self.upper] = True
        return m

    def contains(self, value: int) -> bool:
        return self.lower <= value <= self.upper

    def __str__(self) -> str:
        return f"{self.lower}:{self.upper}"

    @classmethod
    def parse(cls, text: str) -> "RangeQuery":
        lo, sep, hi = text.partition(":")
        if not sep:
            raise ValueError(f"range must look like LO:HI, got {text!r}")
        return cls(int(lo), int(hi))


class SurvivalProbs(NamedTuple):
    """Range-consistency probabilities after ``zeta`` slots.

    ``a``/``b``/``c`` are conditional on the sampled value (in range / in range /
    out of range); ``d``/``e`` are the unconditional joint probabilities used by
    round-robin.
    """

    a: float
    b: float
    c: float
    d: float
    e: float


def is_irreducible(z: np.ndarray) -> bool:
    n_comp, _ = connected_components(z > 0, directed=True, connection="strong")
    return n_comp == 1


def build_birth_death(M: int, q: float) -> TransitionMatrix:
    """Truncated birth-death chain: step up or down with probability ``q`` each.

    Boundary states hold with probability ``1 - q``. ``q = 0`` gives the frozen
    identity chain, whose stationary distribution is taken as the ``q -> 0+``
    limit (uniform).
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if not 0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 0.5], got {q}")
    if q == 0.5 and M > 2:
        warnings.warn(
            "q = 0.5 leaves interior states without a self-loop; the chain may be periodic",
            RuntimeWarning,
            stacklevel=2,
        )
    z = np.zeros((M, M))
    idx = np.arange(M - 1)
    z[idx, idx + 1] = q
    z[idx + 1, idx] = q
    z[np.arange(M), np.arange(M)] = 1.0 - 2.0 * q
    z[0, 0] = z[-1, -1] = 1.0 - q
    hint = np.full(M, 1.0 / M) if q == 0 else None
    return TransitionMatrix(z, stationary_hint=hint)


def _gth(z: np.ndarray) -> np.ndarray:
    # Grassmann-Taksar-Heyman state reduction; subtraction-free, so it keeps full
    # relative accuracy for nearly-decomposable chains.
    a = np.array(z, dtype=float)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if s <= 0:
            raise ValueError("stationary distribution undefined: chain is reducible")
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ a[:k, k]
    return pi / pi.sum()


def stationary(Z: TransitionMatrix) -> np.ndarray:
    """Stationary distribution ``pi`` with ``pi Z = pi`` and unit mass."""
    if Z.stationary_hint is not None:
        return Z.stationary_hint
    pi = _gth(Z.entries)
    resid = np.max(np.abs(pi @ Z.entries - pi))
    if resid > 1e-10:
        raise ArithmeticError(f"stationary solve did not converge (residual {resid:.3g})")
    pi.setflags(write=False)
    return pi


def matrix_power(Z: TransitionMatrix | np.ndarray, zeta: int) -> np.ndarray:
    """``Z**zeta`` by repeated squaring; ``Z**0`` is the identity."""
    if zeta < 0 or int(zeta) != zeta:
        raise ValueError(f"zeta must be a non-negative integer, got {zeta}")
    z = Z.entries if isinstance(Z, TransitionMatrix) else np.asarray(Z, dtype=float)
    return np.linalg.matrix_power(z, int(zeta))


def wake_probability(pi: np.ndarray, r: RangeQuery) -> float:
    return float(np.sum(np.asarray(pi)[r.mask(len(pi))]))


def survival_from_power(zpow: np.ndarray, pi: np.ndarray, r: RangeQuery) -> SurvivalProbs:
    """Range-survival probabilities given a precomputed ``Z**zeta``."""
    inside = r.mask(len(pi))
    outside = ~inside
    pi = np.asarray(pi)
    p_in = pi[inside].sum()
    p_out = pi[outside].sum()
    d = float(pi[inside] @ zpow[np.ix_(inside, inside)].sum(axis=1)) if p_in > 0 else 0.0
    e = float(pi[outside] @ zpow[np.ix_(outside, outside)].sum(axis=1)) if outside.any() else 0.0
    return _finish(d, e, p_in, p_out, outside.any())


def _finish(d: float, e: float, p_in: float, p_out: float, has_outside: bool) -> SurvivalProbs:
    # sums of stationary mass can land an ulp above 1
    d, e = min(d, 1.0), min(e, 1.0)
    a = min(d / p_in, 1.0) if p_in > 0 else 1.0
    # Empty complement: the out-of-range condition is vacuous.
    c = min(e / p_out, 1.0) if has_outside and p_out > 0 else 1.0
    return SurvivalProbs(a, 1.0 - a, c, d, e)


def range_survival_probs(Z: TransitionMatrix, pi: np.ndarray, r: RangeQuery, zeta: int) -> SurvivalProbs:
    r.check(Z.size)
    return survival_from_power(matrix_power(Z, zeta), pi, r)


class SurvivalSweep:
    """Yields ``SurvivalProbs`` for ``zeta = 0, 1, 2, ...`` at O(M^2) per step.

    Propagates the two restricted row vectors ``pi|in Z^t`` and ``pi|out Z^t``
    instead of the full matrix power.
    """

    def __init__(self, Z: TransitionMatrix, pi: np.ndarray, r: RangeQuery):
        self._z = Z.entries
        self._inside = r.mask(Z.size)
        pi = np.asarray(pi, dtype=float)
        self._mu_in = np.where(self._inside, pi, 0.0)
        self._mu_out = np.where(self._inside, 0.0, pi)
        self._p_in = self._mu_in.sum()
        self._p_out = self._mu_out.sum()
        self._has_outside = bool((~self._inside).any())
        self.zeta = 0

    def current(self) -> SurvivalProbs:
        d = float(self._mu_in[self._inside].sum())
        e = float(self._mu_out[~self._inside].sum())
        return _finish(d, e, self._p_in, self._p_out, self._has_outside)

    def step(self) -> SurvivalProbs:
        self._mu_in = self._mu_in @ self._z
        self._mu_out = self._mu_out @ self._z
        self.zeta += 1
        return self.current()

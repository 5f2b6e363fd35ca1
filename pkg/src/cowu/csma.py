"""Absorbing Markov chain of p-persistent CSMA with L-slot transmissions.

State ``(n, l)``: ``n`` nodes still have to deliver, the ongoing transmission has
occupied ``l`` slots (``l = 0`` means the channel is idle). For ``w`` initially
active nodes states are ordered ``(w,0), ..., (w,L-1), (w-1,0), ..., (1,L-1), (0,0)``,
so ``(n, l)`` sits at index ``(w - n) * L + l`` and the chain for ``w`` is the
trailing ``w*L + 1`` block of the chain for any larger ``w``.

A transmission that starts in slot ``k`` occupies slots ``k .. k+L-1`` and counts
as delivered by horizon ``zeta`` iff ``k + L <= zeta``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.sparse as sp

NORM_TOL = 1e-12


@dataclass(frozen=True)
class CsmaParams:
    p: float
    L: int

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.L < 1 or int(self.L) != self.L:
            raise ValueError(f"L must be a positive integer, got {self.L}")


@dataclass(frozen=True)
class CsmaChainState:
    w: int
    phi: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, w: int, params: CsmaParams) -> "CsmaChainState":
        phi = np.zeros(w * params.L + 1)
        phi[0] = 1.0
        return cls(w, phi, 0)


def success_probability(n: int, p: float) -> float:
    """Probability that a started transmission is a lone one, given >= 1 starter."""
    return n * p * (1 - p) ** (n - 1) / (1 - (1 - p) ** n)


def state_index(w: int, n: int, l: int, L: int) -> int:
    return (w - n) * L + l


def build_transition_matrix(w: int, params: CsmaParams) -> sp.csr_matrix:
    """Sparse ``(wL+1) x (wL+1)`` transition matrix of the chain started at ``w``."""
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    p, L = params.p, params.L
    size = w * L + 1
    rows, cols, vals = [size - 1], [size - 1], [1.0]

    def add(i, j, v):
        if v != 0.0:
            rows.append(i)
            cols.append(j)
            vals.append(v)

    for n in range(w, 0, -1):
        idle = state_index(w, n, 0, L)
        quiet = (1 - p) ** n
        after_ok = state_index(w, n - 1, 0, L)
        s_n = success_probability(n, p)
        if L == 1:
            # start and resolution collapse into one slot
            ok = (1 - quiet) * s_n
            add(idle, after_ok, ok)
            add(idle, idle, 1.0 - ok)
            continue
        add(idle, idle, quiet)
        add(idle, idle + 1, 1.0 - quiet)
        for l in range(1, L - 1):
            add(idle + l, idle + l + 1, 1.0)
        add(idle + L - 1, after_ok, s_n)
        add(idle + L - 1, idle, 1.0 - s_n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def evolve(state: CsmaChainState, R: sp.spmatrix, steps: int) -> CsmaChainState:
    """Advance ``phi`` by ``steps`` slots: ``phi(t+1) = phi(t) R``."""
    if R.shape != (len(state.phi), len(state.phi)):
        raise ValueError(f"state of length {len(state.phi)} does not match R of shape {R.shape}")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    rt = R.T.tocsr()
    phi = np.array(state.phi, dtype=float)
    for _ in range(steps):
        phi = rt @ phi
    return CsmaChainState(state.w, phi, state.t + steps)


def aggregate(phi: np.ndarray, w: int, L: int) -> np.ndarray:
    """Collapse ``phi`` to ``P_s(w_s)``, ``w_s = 0..w`` (index = successes)."""
    # block k (k = w - n) holds the L states of n pending nodes, i.e. k successes
    out = np.empty(w + 1)
    out[:w] = phi[: w * L].reshape(w, L).sum(axis=1)
    out[w] = phi[w * L]
    return out


def success_distribution(w: int, params: CsmaParams, zeta: int) -> np.ndarray:
    """``P_s(w_s, zeta)`` for ``w_s = 0..w``."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    R = build_transition_matrix(w, params)
    state = evolve(CsmaChainState.initial(w, params), R, zeta)
    return aggregate(state.phi, w, params.L)


class SuccessTable:
    """All-``w`` success distributions swept over ``zeta = 0, 1, 2, ...``.

    Evolves one stacked chain (started at every ``w = 0..N``) so a full sweep costs
    one sparse product per slot. ``table()[w, w_s]`` is ``P_s(w_s, zeta | w)``.
    """

    def __init__(self, N: int, params: CsmaParams):
        self.N, self.L = N, params.L
        R = build_transition_matrix(N, params)
        self._rt = R.T.tocsr()
        size = N * params.L + 1
        # column w of _phi is the chain started at (w, 0)
        self._phi = np.zeros((size, N + 1))
        starts = [state_index(N, w, 0, params.L) for w in range(N + 1)]
        self._phi[starts, np.arange(N + 1)] = 1.0
        self.zeta = 0

    def step(self) -> None:
        self._phi = self._rt @ self._phi
        self.zeta += 1

    def table(self) -> np.ndarray:
        N, L = self.N, self.L
        # pending[n, w] = mass with n nodes pending, n = N..1 then 0
        pending = np.empty((N + 1, N + 1))
        pending[:N] = self._phi[: N * L].reshape(N, L, N + 1).sum(axis=1)
        pending[N] = self._phi[N * L]
        pending = pending[::-1]  # row n = number pending
        ws = np.arange(N + 1)
        n_idx = ws[:, None] - ws[None, :]  # [w, w_s] -> n = w - w_s
        valid = n_idx >= 0
        out = np.zeros((N + 1, N + 1))
        w_idx = np.broadcast_to(ws[:, None], n_idx.shape)
        out[valid] = pending[n_idx[valid], w_idx[valid]]
        return out

    def __iter__(self) -> Iterator[np.ndarray]:
        while True:
            yield self.table()
            self.step()

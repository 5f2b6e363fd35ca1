"""Brute-force reference computations for tiny instances.

Nothing here reuses the chain, matrix-power or closed-form code paths: process
paths are enumerated one trajectory at a time and CSMA outcomes node by node.
Cost is exponential; keep N, M, L and the horizon small.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from functools import lru_cache


def schoolbook_matmul(a, b):
    n, m, k = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(m)) for j in range(k)] for i in range(n)]


def path_endpoints(z, start: int, steps: int) -> dict[int, float]:
    """Distribution of the state after ``steps`` slots, by summing every path."""
    M = len(z)
    out: dict[int, float] = defaultdict(float)
    for path in itertools.product(range(M), repeat=steps):
        prob, cur = 1.0, start
        for nxt in path:
            prob *= z[cur][nxt]
            cur = nxt
            if prob == 0.0:
                break
        if prob:
            out[cur] += prob
    if steps == 0:
        out[start] = 1.0
    return dict(out)


def csma_outcomes(nodes: tuple, p: float, L: int, horizon: int) -> dict[frozenset, float]:
    """Distribution of the set of nodes delivered by ``horizon`` under slotted
    p-persistent CSMA, enumerating every node's decision in every idle slot."""
    result: dict[frozenset, float] = defaultdict(float)

    def walk(pending: tuple, t: int, done: frozenset, prob: float):
        if prob == 0.0:
            return
        if t >= horizon or not pending:
            result[done] += prob
            return
        for choice in itertools.product((0, 1), repeat=len(pending)):
            pr = prob
            for c in choice:
                pr *= p if c else 1 - p
            starters = [node for node, c in zip(pending, choice) if c]
            if not starters:
                walk(pending, t + 1, done, pr)
            elif len(starters) == 1 and t + L <= horizon:
                rest = tuple(x for x in pending if x != starters[0])
                walk(rest, t + L, done | {starters[0]}, pr)
            else:
                walk(pending, t + L, done, pr)

    walk(tuple(nodes), 0, frozenset(), 1.0)
    return dict(result)


def success_count_distribution(w: int, p: float, L: int, horizon: int) -> list[float]:
    out = [0.0] * (w + 1)
    for delivered, prob in csma_outcomes(tuple(range(w)), p, L, horizon).items():
        out[len(delivered)] += prob
    return out


def _joint_states(pi, N):
    for states in itertools.product(range(len(pi)), repeat=N):
        prob = 1.0
        for s in states:
            prob *= pi[s]
        if prob:
            yield states, prob


def gamma_cowu(z, pi, lo: int, hi: int, N: int, p: float, L: int, zeta: int, perfect_mac: bool = False) -> float:
    """Exact CoWu accuracy by enumerating initial states, trajectories and MAC outcomes.

    ``lo``/``hi`` are 1-indexed range limits.
    """
    z = [list(map(float, row)) for row in z]
    inside = set(range(lo - 1, hi))
    ends = {s: path_endpoints(z, s, zeta) for s in range(len(z))}

    @lru_cache(maxsize=None)
    def mac(awake: tuple):
        if perfect_mac:
            return {frozenset(awake): 1.0}
        return csma_outcomes(awake, p, L, zeta)

    total = 0.0
    for starts, p_start in _joint_states(pi, N):
        awake = tuple(i for i, s in enumerate(starts) if s in inside)
        outcomes = mac(awake)
        for finals in itertools.product(*(ends[s].items() for s in starts)):
            p_final = 1.0
            for _, pr in finals:
                p_final *= pr
            in_range = frozenset(i for i, (v, _) in enumerate(finals) if v in inside)
            total += p_start * p_final * outcomes.get(in_range, 0.0)
    return total


def gamma_round_robin(z, pi, lo: int, hi: int, N: int, L: int) -> float:
    """Exact round-robin accuracy: node ``j`` samples ``(N - j) L`` slots before the deadline."""
    z = [list(map(float, row)) for row in z]
    inside = set(range(lo - 1, hi))
    total = 0.0
    for starts, p_start in _joint_states(pi, N):
        per_node = [path_endpoints(z, s, (N - j) * L) for j, s in enumerate(starts)]
        for finals in itertools.product(*(d.items() for d in per_node)):
            p_final = 1.0
            for _, pr in finals:
                p_final *= pr
            if all((s in inside) == (v in inside) for s, (v, _) in zip(starts, finals)):
                total += p_start * p_final
    return total


def stationary_by_iteration(z, tol: float = 1e-15, max_iter: int = 10**6) -> list[float]:
    """Stationary vector by plain power iteration on a lazy copy of ``z``
    (the half-self-loop removes periodicity without moving the fixed point)."""
    M = len(z)
    lazy = [[0.5 * z[i][j] + (0.5 if i == j else 0.0) for j in range(M)] for i in range(M)]
    pi = [1.0 / M] * M
    for _ in range(max_iter):
        nxt = [sum(pi[i] * lazy[i][j] for i in range(M)) for j in range(M)]
        if sum(abs(x - y) for x, y in zip(nxt, pi)) < tol:
            return nxt
        pi = nxt
    raise ArithmeticError("power iteration did not converge")

"""Slot-level Monte Carlo simulation of CoWu and round-robin data collection.

Each round owns two random streams spawned from ``(base_seed, round_index)``:
one for the physical processes, one for the MAC. Keeping them apart makes the
MAC outcome (and so CoWu energy) identical across deadlines for a given seed.

Process paths are generated event by event: with ``d`` the smallest self-loop
probability of ``Z``, a node attempts a move with probability ``1 - d`` per slot
and then jumps according to the residual kernel ``(Z - d I) / (1 - d)``. This is
exact at slot resolution and skips the (many) slots in which nothing happens.
"""
from __future__ import annotations

import csv
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .accuracy import ScenarioConfig
from .energy import EnergyModel
from .process import TransitionMatrix, stationary

Z95 = 1.959963984540054


@dataclass
class NodeState:
    """Mutable per-node bookkeeping for one round."""

    process_value: int
    sampled_value: int
    mac_status: str = "asleep"  # asleep | contending | transmitting | done
    remaining_slots: int = 0
    energy_J: float = 0.0


@dataclass(frozen=True)
class RoundResult:
    true_set: frozenset
    received_set: frozenset
    total_energy_J: float
    completion_slot: int | None
    w: int
    w_s: int
    node_energy_J: np.ndarray = field(repr=False, compare=False)

    @property
    def exact_match(self) -> bool:
        return self.true_set == self.received_set


def round_streams(base_seed: int, round_index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(process, mac) generators for one round."""
    proc, mac = np.random.SeedSequence([base_seed, round_index]).spawn(2)
    return np.random.default_rng(proc), np.random.default_rng(mac)


@lru_cache(maxsize=32)
def _jump_kernel(Z: TransitionMatrix) -> np.ndarray:
    """Cumulative rows of the transition law conditioned on a move attempt."""
    z = Z.entries
    d = float(np.min(np.diag(z)))
    return np.cumsum((z - d * np.eye(len(z))) / (1.0 - d), axis=1)


class ProcessPaths:
    """Piecewise-constant trajectories of N independent chains on ``[0, horizon]``.

    Values are 0-indexed states; an event at time ``t`` means the value held from
    slot ``t`` on.
    """

    def __init__(self, start: np.ndarray, nodes: np.ndarray, times: np.ndarray, values: np.ndarray):
        self.start = start
        order = np.lexsort((times, nodes))
        self.nodes, self.times, self.values = nodes[order], times[order], values[order]

    @classmethod
    def sample(cls, Z: TransitionMatrix, start: np.ndarray, horizon: int, rng: np.random.Generator) -> "ProcessPaths":
        z = Z.entries
        d = float(np.min(np.diag(z)))
        move = 1.0 - d
        nodes, times, values = [], [], []
        if move > 0 and horizon > 0:
            kernel = _jump_kernel(Z)
            cur = np.array(start)
            t = np.zeros(len(start), dtype=np.int64)
            active = np.arange(len(start))
            while active.size:
                t_next = t[active] + rng.geometric(move, size=active.size)
                keep = t_next <= horizon
                active, t_next = active[keep], t_next[keep]
                if not active.size:
                    break
                u = rng.random(active.size)
                rows = kernel[cur[active]]
                nxt = np.minimum((u[:, None] >= rows).sum(axis=1), len(z) - 1)
                changed = nxt != cur[active]
                nodes.append(active[changed])
                times.append(t_next[changed])
                values.append(nxt[changed])
                t[active] = t_next
                cur[active] = nxt
        cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64)
        return cls(np.asarray(start), cat(nodes), cat(times), cat(values))

    def values_at(self, t) -> np.ndarray:
        """Values at slot ``t``; ``t`` may be a scalar or one slot per node."""
        out = self.start.copy()
        t = np.broadcast_to(t, out.shape)
        sel = self.times <= t[self.nodes]
        nodes, values = self.nodes[sel], self.values[sel]
        if nodes.size:
            last = np.ones(nodes.size, dtype=bool)
            last[:-1] = nodes[1:] != nodes[:-1]
            out[nodes[last]] = values[last]
        return out

    def node_events(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = np.searchsorted(self.nodes, [node, node + 1])
        return self.times[lo:hi], self.values[lo:hi]


def run_csma(contenders: Sequence[int], p: float, L: int, rng: np.random.Generator, max_slots: int = 10**6):
    """Slot-by-slot p-persistent CSMA until every contender has delivered.

    Returns ``(completion, tx_slots, rx_slots)`` keyed by position in
    ``contenders``; ``completion`` is the slot at which the node's frame ended
    (``inf`` if it never got through within ``max_slots``). Contending nodes
    listen in every slot they are not transmitting.
    """
    w = len(contenders)
    completion = np.full(w, np.inf)
    tx = np.zeros(w, dtype=np.int64)
    rx = np.zeros(w, dtype=np.int64)
    pending = list(range(w))
    t = 0
    while pending and t < max_slots:
        if p >= 1 and len(pending) >= 2:
            break  # every idle slot collides forever
        starters = np.flatnonzero(rng.random(len(pending)) < p)
        if starters.size == 0:
            rx[pending] += 1
            t += 1
            continue
        busy = [pending[i] for i in starters]
        tx[busy] += L
        rx[[k for k in pending if k not in busy]] += L
        if len(busy) == 1:
            completion[busy[0]] = t + L
            pending.remove(busy[0])
        t += L
    return completion, tx, rx


@dataclass(frozen=True)
class CowuTrajectory:
    """One CoWu round evaluated at several deadlines at once."""

    zetas: np.ndarray
    exact_match: np.ndarray
    w: int
    delivered_by: np.ndarray  # successes by each zeta
    completion: np.ndarray  # per awakened node, node order
    awake: np.ndarray
    node_energy_J: np.ndarray  # length N

    @property
    def total_energy_J(self) -> float:
        return float(self.node_energy_J.sum())


@lru_cache(maxsize=32)
def _process(cfg: ScenarioConfig) -> tuple[TransitionMatrix, np.ndarray, np.ndarray]:
    Z = cfg.chain()
    return Z, stationary(Z), cfg.range.mask(cfg.M)


def _initial_states(pi: np.ndarray, N: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(len(pi), size=N, p=pi)


def cowu_trajectory(cfg: ScenarioConfig, energy: EnergyModel, zetas: Sequence[int], streams) -> CowuTrajectory:
    zetas = np.asarray(zetas, dtype=np.int64)
    proc_rng, mac_rng = streams
    Z, pi, inside = _process(cfg)
    start = _initial_states(pi, cfg.N, proc_rng)
    awake = np.flatnonzero(inside[start])
    paths = ProcessPaths.sample(Z, start, int(zetas.max(initial=0)), proc_rng)

    completion, tx, rx = run_csma(awake, cfg.p, cfg.L, mac_rng)
    node_energy = np.zeros(cfg.N)
    node_energy[awake] = energy.energy(tx, rx)

    ok = np.ones(len(zetas), dtype=bool)
    done_at = dict(zip(awake.tolist(), completion.tolist()))
    # Only awakened nodes and nodes that cross the range boundary can be inconsistent.
    candidates = set(done_at)
    if paths.nodes.size:
        crosses = inside[paths.values] != inside[start[paths.nodes]]
        candidates.update(paths.nodes[crosses].tolist())
    for node in candidates:
        times, values = paths.node_events(node)
        pos = np.searchsorted(times, zetas, side="right")
        in_range = np.where(pos == 0, inside[start[node]], inside[values[np.maximum(pos - 1, 0)]] if values.size else False)
        delivered = zetas >= done_at.get(node, np.inf)
        ok &= in_range == delivered
    delivered_by = (completion[None, :] <= zetas[:, None]).sum(axis=1) if awake.size else np.zeros(len(zetas), dtype=np.int64)
    return CowuTrajectory(zetas, ok, int(awake.size), delivered_by, completion, awake, node_energy)


def _seeded(seed) -> tuple[np.random.Generator, np.random.Generator]:
    if isinstance(seed, tuple):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        proc, mac = seed.spawn(2)
        return np.random.default_rng(proc), np.random.default_rng(mac)
    return round_streams(int(seed), 0)


def simulate_cowu_round(cfg: ScenarioConfig, energy: EnergyModel, zeta: int, seed) -> RoundResult:
    """One CoWu round with deadline ``zeta`` slots after the wake-up signal.

    ``seed`` is an int, a ``SeedSequence`` or a ``(process, mac)`` generator pair.
    Awakened nodes keep contending past the deadline until they deliver; energy
    covers the whole run, the received set only what finished by the deadline.
    """
    proc_rng, mac_rng = _seeded(seed)
    Z, pi, inside = _process(cfg)
    start = _initial_states(pi, cfg.N, proc_rng)
    paths = ProcessPaths.sample(Z, start, zeta, proc_rng)
    nodes = [NodeState(int(v) + 1, int(v) + 1) for v in start]
    awake = np.flatnonzero(inside[start])
    for i in awake:
        nodes[i].mac_status = "contending"
    completion, tx, rx = run_csma(awake, cfg.p, cfg.L, mac_rng)
    for k, i in enumerate(awake):
        nodes[i].energy_J = float(energy.energy(tx[k], rx[k]))
        nodes[i].mac_status = "done" if np.isfinite(completion[k]) else "contending"
    final = paths.values_at(zeta)
    for node, v in zip(nodes, final):
        node.process_value = int(v) + 1
    true_set = frozenset(i for i, node in enumerate(nodes) if cfg.range.contains(node.process_value))
    received = frozenset(int(i) for k, i in enumerate(awake) if completion[k] <= zeta)
    node_energy = np.array([node.energy_J for node in nodes])
    last = completion.max(initial=0)
    return RoundResult(
        true_set=true_set,
        received_set=received,
        total_energy_J=float(node_energy.sum()),
        completion_slot=int(last) if np.isfinite(last) else None,
        w=int(awake.size),
        w_s=len(received),
        node_energy_J=node_energy,
    )


def simulate_round_robin_round(cfg: ScenarioConfig, energy: EnergyModel, seed) -> RoundResult:
    """One TDMA round: node ``j`` samples and sends in slots ``jL .. jL+L-1``;
    the deadline is slot ``N L``. Dedicated slots never collide."""
    proc_rng, _ = _seeded(seed)
    Z, pi, inside = _process(cfg)
    deadline = cfg.N * cfg.L
    start = _initial_states(pi, cfg.N, proc_rng)
    paths = ProcessPaths.sample(Z, start, deadline, proc_rng)
    sampled = paths.values_at(np.arange(cfg.N) * cfg.L)
    final = paths.values_at(deadline)
    node_energy = np.full(cfg.N, float(energy.energy(cfg.L, 0)))
    received = frozenset(np.flatnonzero(inside[sampled]).tolist())
    return RoundResult(
        true_set=frozenset(np.flatnonzero(inside[final]).tolist()),
        received_set=received,
        total_energy_J=float(node_energy.sum()),
        completion_slot=deadline,
        w=cfg.N,
        w_s=cfg.N,
        node_energy_J=node_energy,
    )


@dataclass(frozen=True)
class CampaignResult:
    rounds: int
    gamma_hat: float
    gamma_ci: float  # 95% half-width, normal approximation
    mean_energy_J: float
    energy_ci: float
    degenerate: bool  # fewer than two rounds: the intervals carry no information

    @property
    def gamma_se(self) -> float:
        return self.gamma_ci / Z95

    def to_record(self) -> dict:
        return {
            "rounds": self.rounds,
            "gamma_hat": self.gamma_hat,
            "gamma_ci": self.gamma_ci,
            "mean_energy_J": self.mean_energy_J,
            "energy_ci": self.energy_ci,
            "degenerate": self.degenerate,
        }


def summarize(matches: np.ndarray, energies: np.ndarray) -> CampaignResult:
    n = len(matches)
    g = float(np.mean(matches))
    e_mean = float(np.mean(energies))
    if n < 2:
        return CampaignResult(n, g, 0.0, e_mean, 0.0, True)
    g_ci = Z95 * math.sqrt(g * (1 - g) / n)
    e_ci = 0.0 if np.ptp(energies) == 0 else Z95 * float(np.std(energies, ddof=1)) / math.sqrt(n)
    if e_ci == 0.0:
        e_mean = float(energies[0])
    return CampaignResult(n, g, g_ci, e_mean, e_ci, False)


TRACE_COLUMNS = ("round", "w", "w_s", "exact_match", "energy_J", "completion_slot")


def run_campaign(
    cfg: ScenarioConfig,
    energy: EnergyModel,
    scheme: str = "cowu",
    zeta: int | None = None,
    rounds: int = 10_000,
    base_seed: int = 0,
    trace_path=None,
) -> CampaignResult:
    """Aggregate ``rounds`` independent rounds of ``scheme`` ("cowu" or "round-robin")."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if scheme == "cowu" and zeta is None:
        raise ValueError("cowu campaigns need a deadline zeta")
    results = []
    for k in range(rounds):
        streams = round_streams(base_seed, k)
        if scheme == "cowu":
            results.append(simulate_cowu_round(cfg, energy, zeta, streams))
        elif scheme == "round-robin":
            results.append(simulate_round_robin_round(cfg, energy, streams))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    if trace_path is not None:
        write_trace(trace_path, results)
    return summarize(
        np.array([r.exact_match for r in results], dtype=float),
        np.array([r.total_energy_J for r in results]),
    )


def write_trace(path, results: Iterable[RoundResult]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(TRACE_COLUMNS)
        for k, r in enumerate(results):
            out.writerow([k, r.w, r.w_s, int(r.exact_match), repr(r.total_energy_J), "" if r.completion_slot is None else r.completion_slot])


@dataclass(frozen=True)
class SweepCampaign:
    zetas: np.ndarray
    gamma_hat: np.ndarray
    gamma_ci: np.ndarray
    mean_energy_J: float
    energy_ci: float
    rounds: int


def run_cowu_sweep(cfg: ScenarioConfig, energy: EnergyModel, zetas: Sequence[int], rounds: int, base_seed: int = 0) -> SweepCampaign:
    """CoWu campaign scored at every deadline in ``zetas`` from the same rounds.

    Each round is simulated once up to ``max(zetas)``; the per-deadline
    estimates therefore share random numbers (each one is still a plain
    ``rounds``-round estimate).
    """
    zetas = np.asarray(zetas, dtype=np.int64)
    matches = np.zeros(len(zetas))
    energies = np.empty(rounds)
    for k in range(rounds):
        traj = cowu_trajectory(cfg, energy, zetas, round_streams(base_seed, k))
        matches += traj.exact_match
        energies[k] = traj.total_energy_J
    g = matches / rounds
    ci = Z95 * np.sqrt(g * (1 - g) / rounds) if rounds > 1 else np.zeros(len(zetas))
    summary = summarize(np.zeros(rounds), energies)
    return SweepCampaign(zetas, g, ci, summary.mean_energy_J, summary.energy_ci, rounds)

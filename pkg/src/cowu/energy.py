"""Main-radio energy model and expected energy of one data-collection round."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .accuracy import ScenarioConfig, wake_count_distribution
from .csma import success_probability
from .process import stationary, wake_probability

TARGET_COWU_MJ = 4.50


@dataclass(frozen=True)
class EnergyModel:
    """Radio power draw per state. The wake-up receiver's draw is ignored."""

    tx_power_W: float = 55e-3
    rx_power_W: float = 50e-3
    slot_duration_s: float = 320e-6
    sleep_power_W: float = 0.0

    def __post_init__(self):
        for name in ("tx_power_W", "rx_power_W", "slot_duration_s", "sleep_power_W"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def energy(self, tx_slots, rx_slots):
        return (np.asarray(tx_slots) * self.tx_power_W + np.asarray(rx_slots) * self.rx_power_W) * self.slot_duration_s


def contention_energy(w: int, p: float, L: int, energy: EnergyModel) -> float:
    """Expected joules spent by ``w`` awakened nodes until all have delivered.

    Pending nodes listen in idle slots and during others' frames, and transmit
    for L slots per attempt. Solved backwards over the number still pending.
    """
    tx = energy.tx_power_W * energy.slot_duration_s
    rx = energy.rx_power_W * energy.slot_duration_s
    total = 0.0
    for n in range(1, w + 1):
        quiet = (1 - p) ** n
        s_n = success_probability(n, p)
        if s_n == 0.0:
            return math.inf
        starters = n * p / (1 - quiet)  # mean starters given a busy slot
        busy = L * (starters * tx + (n - starters) * rx)
        # V = quiet (n rx + V) + (1 - quiet) (busy + s_n V' + (1 - s_n) V)
        total = (quiet * n * rx + (1 - quiet) * (busy + s_n * total)) / ((1 - quiet) * s_n)
    return total


def expected_cowu_energy(cfg: ScenarioConfig, energy: EnergyModel, p: float | None = None) -> float:
    p = cfg.p if p is None else p
    pd = wake_count_distribution(cfg.N, wake_probability(stationary(cfg.chain()), cfg.range))
    total = 0.0
    for w, weight in enumerate(pd):
        if weight > 0:
            total += weight * contention_energy(w, p, cfg.L, energy)
    return total


def round_robin_energy(cfg: ScenarioConfig, energy: EnergyModel) -> float:
    return float(np.sum(np.full(cfg.N, float(energy.energy(cfg.L, 0)))))


def calibrate_p(cfg: ScenarioConfig, energy: EnergyModel, target_J: float = TARGET_COWU_MJ * 1e-3, grid=None) -> dict:
    """Persistence probabilities at which expected CoWu energy equals ``target_J``.

    Energy is U-shaped in p (collisions at large p, idle listening at small p),
    so up to two solutions exist. Returns the grid scan, the roots in increasing
    order, and ``p``: the smallest root, or the grid point closest to the target
    when the target is out of reach.
    """
    grid = np.round(np.linspace(0.01, 0.5, 50), 10) if grid is None else np.asarray(grid)
    scan = np.array([expected_cowu_energy(cfg, energy, p) for p in grid])
    gap = scan - target_J
    roots = []
    for k in range(len(grid) - 1):
        if np.isfinite(gap[k]) and np.isfinite(gap[k + 1]) and gap[k] * gap[k + 1] < 0:
            f = lambda p: expected_cowu_energy(cfg, energy, p) - target_J
            roots.append(float(brentq(f, grid[k], grid[k + 1], xtol=1e-12)))
        elif gap[k] == 0:
            roots.append(float(grid[k]))
    best = roots[0] if roots else float(grid[int(np.nanargmin(np.abs(gap)))])
    return {"grid": grid, "expected_J": scan, "roots": roots, "p": best}

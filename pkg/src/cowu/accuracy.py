"""Query accuracy of CoWu and round-robin collection, and wake-up timing optimisation.

Accuracy is the probability that the set of nodes the sink heard from equals the
set of nodes whose value lies in the queried range at the deadline.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy
from scipy.stats import binom

from .csma import CsmaParams, SuccessTable
from .process import (
    RangeQuery,
    SurvivalSweep,
    TransitionMatrix,
    build_birth_death,
    stationary,
    wake_probability,
)

METHODS = ("cowu-analytical", "cowu-upper-bound", "round-robin", "simulated")


class ConfigError(ValueError):
    """Invalid scenario parameter; ``field`` names the offending setting."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ScenarioConfig:
    """Experiment parameters. Defaults are the reference scenario (N = M = 100)."""

    N: int = 100
    M: int = 100
    q: float = 0.0002
    q_hat: float | None = None
    range: RangeQuery = field(default_factory=lambda: RangeQuery(94, 98))
    L: int = 10
    p: float = 0.1
    zeta_max: int = 2000
    matrix: TransitionMatrix | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.q_hat is None:
            object.__setattr__(self, "q_hat", self.q)
        _require(isinstance(self.N, (int, np.integer)) and self.N >= 1, "N", f"must be an integer >= 1, got {self.N!r}")
        _require(isinstance(self.M, (int, np.integer)) and self.M >= 2, "M", f"must be an integer >= 2, got {self.M!r}")
        _require(0 <= self.q <= 0.5, "q", f"must lie in [0, 0.5], got {self.q!r}")
        _require(0 <= self.q_hat <= 0.5, "q_hat", f"must lie in [0, 0.5], got {self.q_hat!r}")
        _require(isinstance(self.L, (int, np.integer)) and self.L >= 1, "L", f"must be an integer >= 1, got {self.L!r}")
        _require(0 < self.p <= 1, "p", f"must lie in (0, 1], got {self.p!r}")
        _require(
            isinstance(self.zeta_max, (int, np.integer)) and self.zeta_max >= 1,
            "zeta_max",
            f"must be an integer >= 1, got {self.zeta_max!r}",
        )
        _require(isinstance(self.range, RangeQuery), "range", "must be a RangeQuery")
        _require(self.range.upper <= self.M, "range", f"[{self.range}] exceeds M={self.M}")
        if self.matrix is not None:
            _require(self.matrix.size == self.M, "matrix", f"has {self.matrix.size} states, M={self.M}")

    @property
    def csma(self) -> CsmaParams:
        return CsmaParams(self.p, self.L)

    def chain(self, q: float | None = None) -> TransitionMatrix:
        """Process matrix for step probability ``q`` (true ``q`` by default)."""
        if self.matrix is not None:
            return self.matrix
        return build_birth_death(self.M, self.q if q is None else q)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_record(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "q": self.q,
            "q_hat": self.q_hat,
            "range": str(self.range),
            "L": self.L,
            "p": self.p,
            "zeta_max": self.zeta_max,
        }


def _require(ok: bool, name: str, message: str) -> None:
    if not ok:
        raise ConfigError(name, message)


@dataclass(frozen=True)
class AccuracyResult:
    gamma: float
    method: str
    zeta: int | None = None
    ci_halfwidth: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not -1e-12 <= self.gamma <= 1 + 1e-12:
            raise ValueError(f"gamma out of [0, 1]: {self.gamma}")

    def to_record(self) -> dict:
        return asdict(self)


def wake_count_distribution(N: int, p_wake: float) -> np.ndarray:
    """Binomial ``P_d(w)``, ``w = 0..N``."""
    if not 0 <= p_wake <= 1:
        raise ValueError(f"wake probability must lie in [0, 1], got {p_wake}")
    k = np.arange(N + 1)
    try:
        return binom.pmf(k, N, p_wake)
    except OverflowError:
        # scipy's pmf overflows for p near the smallest normal float
        pass
    log_choose = gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1)
    return np.exp(log_choose + xlogy(k, p_wake) + xlog1py(N - k, -p_wake))


@lru_cache(maxsize=8)
def _fail_index(N: int) -> tuple[np.ndarray, np.ndarray]:
    ks = np.arange(N + 1)
    diff = ks[:, None] - ks[None, :]
    return np.maximum(diff, 0), (diff >= 0).astype(float)


def _clip(g: float) -> float:
    return min(max(g, 0.0), 1.0)


# Wake counts whose probability is below this are dropped from sweeps; the
# discarded mass is at most (N + 1) * PD_FLOOR.
PD_FLOOR = 1e-30


@dataclass
class _Model:
    """One accuracy curve: process used for staleness and the wake-count law."""

    z: np.ndarray
    pi: np.ndarray
    pd: np.ndarray


def _model(cfg: ScenarioConfig, q_process: float, q_wake: float) -> _Model:
    Z = cfg.chain(q_process)
    pi_wake = stationary(cfg.chain(q_wake))
    return _Model(Z.entries, stationary(Z), wake_count_distribution(cfg.N, wake_probability(pi_wake, cfg.range)))


def _curves(cfg: ScenarioConfig, models: Sequence[_Model], zeta_max: int, upper: bool = False) -> np.ndarray:
    """``out[k, zeta]`` for ``zeta = 0..zeta_max``; one CSMA sweep serves every model."""
    N = cfg.N
    inside = cfg.range.mask(cfg.M)
    has_outside = bool((~inside).any())
    z = np.stack([m.z for m in models])
    pi = np.stack([m.pi for m in models])
    pd = np.stack([m.pd for m in models])
    W = int(np.flatnonzero(pd.max(axis=0) > PD_FLOOR).max()) + 1
    ks = np.arange(W)
    fails, lower = _fail_index(W - 1)
    partial = lower * (fails > 0)  # ws < w
    pd_c = pd[:, :W]
    stay_out_exp = N - ks

    mu_in = np.where(inside, pi, 0.0)
    mu_out = np.where(inside, 0.0, pi)
    p_in = mu_in.sum(axis=1)
    p_out = mu_out.sum(axis=1)
    table = None if upper else SuccessTable(N, cfg.csma)
    out = np.empty((len(models), zeta_max + 1))
    for zeta in range(zeta_max + 1):
        d = mu_in[:, inside].sum(axis=1)
        e = mu_out[:, ~inside].sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(p_in > 0, np.minimum(d / p_in, 1.0), 1.0)
            c = np.where((p_out > 0) & has_outside, np.minimum(e / p_out, 1.0), 1.0)
        b = 1.0 - a
        a_pow = np.power(a[:, None], ks)
        weight = pd_c * np.power(c[:, None], stay_out_exp)
        bound = np.sum(weight * a_pow, axis=1)
        if upper:
            out[:, zeta] = bound
        else:
            # partial delivery replaces a^w by a^ws b^(w - ws); summing only that
            # difference keeps the result below the bound in floating point too
            consistent = a_pow[:, None, :] * np.power(b[:, None], ks)[:, fails] * partial
            loss = a_pow[:, :, None] * partial - consistent
            deficit = np.einsum("kws,ws->kw", loss, table.table()[:W, :W])
            out[:, zeta] = bound - np.sum(weight * deficit, axis=1)
        if zeta < zeta_max:
            if table is not None:
                table.step()
            mu_in = np.matmul(mu_in[:, None, :], z)[:, 0, :]
            mu_out = np.matmul(mu_out[:, None, :], z)[:, 0, :]
    return np.clip(out, 0.0, 1.0)


def gamma_cowu_curve(cfg: ScenarioConfig, zeta_max: int | None = None, q: float | None = None, upper: bool = False) -> np.ndarray:
    """CoWu accuracy for every ``zeta = 0..zeta_max`` (index = zeta)."""
    q = cfg.q if q is None else q
    return _curves(cfg, [_model(cfg, q, q)], cfg.zeta_max if zeta_max is None else zeta_max, upper)[0]


def gamma_cowu(cfg: ScenarioConfig, zeta: int) -> AccuracyResult:
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    return AccuracyResult(float(gamma_cowu_curve(cfg, zeta)[zeta]), "cowu-analytical", int(zeta))


def gamma_cowu_upper_bound(cfg: ScenarioConfig, zeta: int) -> AccuracyResult:
    """Accuracy if every awakened node delivered instantly and surely."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    return AccuracyResult(float(gamma_cowu_curve(cfg, zeta, upper=True)[zeta]), "cowu-upper-bound", int(zeta))


def round_robin_gamma(cfg: ScenarioConfig, q: float | None = None) -> float:
    sweep = SurvivalSweep(cfg.chain(q), stationary(cfg.chain(q)), cfg.range)
    gamma = 1.0
    # the node scheduled k-th from the end has a sample aged k*L slots
    for age in range(1, cfg.N * cfg.L + 1):
        s = sweep.step()
        if age % cfg.L == 0:
            gamma *= s.d + s.e
    return _clip(gamma)


def gamma_round_robin(cfg: ScenarioConfig) -> AccuracyResult:
    return AccuracyResult(round_robin_gamma(cfg), "round-robin")


def optimize_zeta(cfg: ScenarioConfig) -> tuple[int, float]:
    """Best wake-up lead ``zeta`` in ``1..zeta_max`` under the assumed ``q_hat``.

    Returns ``(zeta_opt, gamma)`` where ``gamma`` is the accuracy the sink expects
    under its own model. Ties go to the smaller ``zeta``.
    """
    curve = _curves(cfg, [_model(cfg, cfg.q_hat, cfg.q)], cfg.zeta_max)[0]
    zeta = 1 + int(np.argmax(curve[1:]))
    return zeta, float(curve[zeta])


@dataclass(frozen=True)
class MismatchPoint:
    q: float
    q_hat: float
    zeta_opt: int
    gamma: float
    zeta_opt_perfect: int
    gamma_perfect: float
    gamma_round_robin: float

    def to_record(self) -> dict:
        return asdict(self)


def mismatch_curves(cfg: ScenarioConfig, q_true_values: Sequence[float], q_hat_values: Sequence[float]) -> dict[float, list[MismatchPoint]]:
    """``mismatch_curve`` for several assumed values at once (one CSMA sweep)."""
    models = []
    for q in q_true_values:
        models.append(_model(cfg, q, q))
        models.extend(_model(cfg, q_hat, q) for q_hat in q_hat_values)
    curves = _curves(cfg, models, cfg.zeta_max)
    stride = 1 + len(q_hat_values)
    out: dict[float, list[MismatchPoint]] = {float(h): [] for h in q_hat_values}
    for k, q in enumerate(q_true_values):
        true_curve = curves[k * stride]
        z_true = 1 + int(np.argmax(true_curve[1:]))
        rr = round_robin_gamma(cfg, q)
        for j, q_hat in enumerate(q_hat_values):
            z_hat = 1 + int(np.argmax(curves[k * stride + 1 + j][1:]))
            out[float(q_hat)].append(
                MismatchPoint(
                    q=float(q),
                    q_hat=float(q_hat),
                    zeta_opt=z_hat,
                    gamma=float(true_curve[z_hat]),
                    zeta_opt_perfect=z_true,
                    gamma_perfect=float(true_curve[z_true]),
                    gamma_round_robin=rr,
                )
            )
    return out


def mismatch_curve(cfg: ScenarioConfig, q_true_values: Sequence[float], q_hat: float) -> list[MismatchPoint]:
    """Accuracy achieved when ``zeta`` is tuned with ``q_hat`` but the process runs at ``q``.

    Each point also carries the perfect-knowledge optimum and round-robin accuracy.
    """
    return mismatch_curves(cfg, q_true_values, [q_hat])[float(q_hat)]

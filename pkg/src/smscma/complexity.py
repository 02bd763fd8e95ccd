"""Real-operation accounting for the detectors.

Closed-form counts of real additions and multiplications for MPA, SUD, MSUD
and FCSD, the runtime tally the detectors fill in while decoding, and the
survival probability of the optimum path under a pruning radius.

Charging conventions (shared by the formulas and the runtime tally):

* complex product ``h * c``: 4 real muls, 2 real adds
* complex subtraction: 2 real adds
* ``|z|^2``: 2 real muls, 1 real add
* one residual ``sum_{n_r} |y - sum_{d_f users} h c|^2`` at one ORE therefore
  costs ``N_r(4 d_f + 2)`` muls and ``N_r(4 d_f + 2) - 1`` adds; every
  hypothesis, MSUD user hypothesis and tree node is charged at this rate
  (FCSD nodes at ``N_r(4 d_f + 2) - R - 2`` adds, the per-node rate of the
  closed form).
* ORE ordering: one ``|h|^2`` per (user, ORE, receive antenna) plus the
  per-ORE sum, ``R(2 N_r d_f - 1)`` adds and ``2 R N_r d_f`` muls. The energy
  actually used sums over all N_t candidate antennas; the extra
  ``(N_t - 1)`` squared magnitudes are reported as ``ordering_surplus`` in the
  decode metadata rather than folded into the count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SystemConfig


@dataclass(frozen=True)
class OpCount:
    real_adds: int = 0
    real_muls: int = 0

    def __post_init__(self):
        if self.real_adds < 0 or self.real_muls < 0:
            raise ValueError("operation counts are non-negative")

    def __add__(self, other: "OpCount") -> "OpCount":
        return OpCount(self.real_adds + other.real_adds, self.real_muls + other.real_muls)

    def __mul__(self, k: int) -> "OpCount":
        return OpCount(self.real_adds * k, self.real_muls * k)

    __rmul__ = __mul__

    def as_dict(self) -> dict:
        return {"adds": self.real_adds, "muls": self.real_muls}


class OpCounter:
    """Mutable tally local to one decode call."""

    def __init__(self):
        self.adds = 0
        self.muls = 0

    def charge(self, adds: int, muls: int, times: int = 1) -> None:
        self.adds += int(adds) * int(times)
        self.muls += int(muls) * int(times)

    def total(self) -> OpCount:
        return OpCount(self.adds, self.muls)


def residual_cost(N_r: int, d_f: int) -> tuple:
    """(adds, muls) of one N_r-antenna residual with d_f superimposed users."""
    muls = N_r * (4 * d_f + 2)
    return muls - 1, muls


def ordering_cost(R: int, N_r: int, d_f: int) -> tuple:
    return R * (2 * N_r * d_f - 1), 2 * R * N_r * d_f


def formula_mpa(cfg: SystemConfig, K: int | None = None) -> OpCount:
    K = cfg.K_mpa if K is None else K
    R, d_f, d_v, U, N_r = cfg.R, cfg.d_f, cfg.d_v, cfg.U, cfg.N_r
    Qd = cfg.Q ** d_f
    adds = R * d_f * Qd * (2 * N_r * (2 * d_f + 1) - 1) + K * R * d_f * (Qd - 1)
    muls = (R * d_f * Qd * (2 * N_r * (2 * d_f + 1) + K * d_f + 1)
            + cfg.Q * (d_v - 1) * (K * R * d_f + U))
    return OpCount(adds, muls)


def _level_sum(cfg: SystemConfig, u_sequence: Sequence[int]) -> int:
    return sum(cfg.Q ** u for u in u_sequence if u != 0)


def formula_sud(cfg: SystemConfig, u_sequence: Sequence[int]) -> OpCount:
    oa, om = ordering_cost(cfg.R, cfg.N_r, cfg.d_f)
    ha, hm = residual_cost(cfg.N_r, cfg.d_f)
    s = _level_sum(cfg, u_sequence)
    return OpCount(oa + ha * s, om + hm * s)


def formula_msud(cfg: SystemConfig, u_sequence: Sequence[int], K: int | None = None) -> OpCount:
    K = cfg.K_msud if K is None else K
    oa, om = ordering_cost(cfg.R, cfg.N_r, cfg.d_f)
    ha, hm = residual_cost(cfg.N_r, cfg.d_f)
    s = K * cfg.U * cfg.Q + _level_sum(cfg, u_sequence)
    return OpCount(oa + ha * s, om + hm * s)


def effective_rho(cfg: SystemConfig, u_sequence: Sequence[int], rho: Sequence[float]) -> list:
    """Survivor counts after clamping each level to [1, nodes available]."""
    out = []
    nodes = cfg.Q ** u_sequence[0]
    for r in range(1, len(u_sequence)):
        keep = int(min(max(rho[r - 1], 1), nodes))
        out.append(keep)
        nodes = keep * cfg.Q ** u_sequence[r]
    return out


def fcsd_node_count(cfg: SystemConfig, u_sequence: Sequence[int], rho: Sequence[float]) -> int:
    kept = effective_rho(cfg, u_sequence, rho)
    return cfg.Q ** cfg.d_f + sum(kept[r - 1] * cfg.Q ** u_sequence[r]
                                  for r in range(1, len(u_sequence)))


def fcsd_node_cost(cfg: SystemConfig) -> tuple:
    muls = cfg.N_r * (4 * cfg.d_f + 2)
    return muls - cfg.R - 2, muls


def formula_fcsd(cfg: SystemConfig, u_sequence: Sequence[int], rho: Sequence[float] | None = None) -> OpCount:
    rho = cfg.rho if rho is None else rho
    oa, om = ordering_cost(cfg.R, cfg.N_r, cfg.d_f)
    na, nm = fcsd_node_cost(cfg)
    nodes = fcsd_node_count(cfg, u_sequence, rho)
    return OpCount(oa + na * nodes, om + nm * nodes)


def measure_ops(decoder, rx, H) -> OpCount:
    """Run a fitted decoder once and return the operations it tallied."""
    return decoder.predict(rx, H).ops


# --- pruning-radius diagnostic -------------------------------------------------

_SERIES_TOL = 1e-12


def _lower_gamma_int(n: int, x: float) -> float:
    """Regularized lower incomplete gamma P(n, x) for integer n >= 1."""
    if x <= 0:
        return 0.0
    # P(n, x) = 1 - exp(-x) sum_{j<n} x^j / j!; the sum is taken in log space.
    if x > n + 40 * math.sqrt(n) + 50:
        return 1.0
    log_terms = [j * math.log(x) - math.lgamma(j + 1) - x for j in range(n)]
    m = max(log_terms)
    upper = math.exp(m) * sum(math.exp(t - m) for t in log_terms)
    return min(max(1.0 - upper, 0.0), 1.0)


def marcum_q_cdf(order: int, a: float, b: float) -> float:
    """1 - Q_order(a, b) as a Poisson mixture of central chi-squared CDFs.

    ``1 - Q_M(a, b) = sum_k Pois(k; a^2/2) P(M + k, b^2/2)``; terms are
    non-negative and the series stops once the remaining Poisson mass is
    below 1e-12.
    """
    lam = a * a / 2.0
    x = b * b / 2.0
    if x == 0:
        return 0.0
    if lam == 0:
        return _lower_gamma_int(order, x)
    # Start at the Poisson mode and walk outwards in both directions.
    k0 = int(lam)
    log_w0 = -lam + k0 * math.log(lam) - math.lgamma(k0 + 1)
    total = 0.0
    mass = 0.0
    k, log_w = k0, log_w0
    while True:
        w = math.exp(log_w)
        total += w * _lower_gamma_int(order + k, x)
        mass += w
        if w < _SERIES_TOL * 1e-3 and k > lam:
            break
        k += 1
        log_w += math.log(lam) - math.log(k)
    k, log_w = k0, log_w0
    while k > 0:
        log_w += math.log(k) - math.log(lam)
        k -= 1
        w = math.exp(log_w)
        total += w * _lower_gamma_int(order + k, x)
        mass += w
        if w < _SERIES_TOL * 1e-3:
            break
    # Unvisited tail mass is bounded by 1 - mass and each P(.) <= 1.
    return min(max(total, 0.0), 1.0)


@dataclass(frozen=True)
class RadiusDiagnostic:
    level: int
    alpha2: float
    sigma2: float
    gamma: float
    probability: float


def survival_probability(alpha2: float, sigma2: float, gamma: float, order: int) -> float:
    """Probability that an accumulated metric with non-centrality ``alpha2``
    stays within radius ``gamma``; ``order`` is the number of complex terms
    (level times N_r)."""
    vals = (alpha2, sigma2, gamma)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("inputs must be finite")
    if min(vals) < 0 or sigma2 == 0 or order < 1:
        raise ValueError("need alpha2, gamma >= 0, sigma2 > 0 and order >= 1")
    s = math.sqrt(sigma2 / 2.0)
    return marcum_q_cdf(int(order), math.sqrt(alpha2) / s, math.sqrt(gamma) / s)


def radius_diagnostic(level: int, N_r: int, alpha2: float, sigma2: float, gamma: float) -> RadiusDiagnostic:
    p = survival_probability(alpha2, sigma2, gamma, level * N_r)
    return RadiusDiagnostic(level, alpha2, sigma2, gamma, p)


def metric_pdf(d: float, alpha2: float, sigma2: float, order: int) -> float:
    """Density of the accumulated metric (non-central chi-squared, 2*order dof)."""
    from scipy.special import ive

    if d <= 0:
        return 0.0
    z = math.sqrt(d * alpha2) / (sigma2 / 2.0)
    # ive(v, z) = iv(v, z) * exp(-z)
    return (1.0 / sigma2) * (d / alpha2) ** ((order - 1) / 2.0) * math.exp(
        -(alpha2 + d) / sigma2 + z) * ive(order - 1, z)


def complexity_table(cfg: SystemConfig, u_sequence: Sequence[int]) -> dict:
    return {
        "MPA": formula_mpa(cfg).as_dict(),
        "SUD": formula_sud(cfg, u_sequence).as_dict(),
        "MSUD": formula_msud(cfg, u_sequence).as_dict(),
        "FCSD": formula_fcsd(cfg, u_sequence).as_dict(),
    }


def ops_mean(counts: Sequence[OpCount]) -> tuple:
    if not counts:
        return (math.nan, math.nan)
    a = np.array([[c.real_adds, c.real_muls] for c in counts], dtype=float)
    return tuple(a.mean(axis=0))

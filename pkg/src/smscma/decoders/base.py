"""Shared machinery for the SM-SCMA detectors.

Detectors follow the scikit-learn estimator protocol: constructor arguments
are hyper-parameters (``get_params``/``set_params``/``clone`` work), ``fit``
binds a system configuration and codebooks, and ``predict`` decodes one
received block into per-user messages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..complexity import OpCount, OpCounter, ordering_cost
from ..model import CodebookSet, FactorGraphSets, SystemConfig
from ..signal import ChannelRealization, ReceivedSignal, UserMessage


class GuardError(RuntimeError):
    """A decoder refused a configuration that is too large to search."""


@dataclass
class DecodeResult:
    """Flat message index per user plus the operation tally of the run."""

    q: np.ndarray
    ops: OpCount
    decoder: str
    M: int
    metadata: dict = field(default_factory=dict)

    @property
    def estimates(self) -> list:
        return [UserMessage.from_index(v, self.M) for v in self.q]


@dataclass(frozen=True)
class LevelPlan:
    """Visiting order of the OREs and the users first estimated at each one."""

    order: tuple
    new_users: tuple

    @property
    def u_sequence(self) -> tuple:
        return tuple(len(n) for n in self.new_users)

    @property
    def fes_levels(self) -> tuple:
        return tuple(i for i, n in enumerate(self.new_users) if n)

    @property
    def ses_levels(self) -> tuple:
        return tuple(i for i, n in enumerate(self.new_users) if not n)


def build_tree_levels(sets: FactorGraphSets, ore_order) -> LevelPlan:
    """Split users into the levels at which they first appear."""
    seen: set = set()
    new_users = []
    for r in ore_order:
        fresh = tuple(u for u in sets.lam[r] if u not in seen)
        seen.update(fresh)
        new_users.append(fresh)
    return LevelPlan(tuple(int(r) for r in ore_order), tuple(new_users))


def ore_energies(H: ChannelRealization, sets: FactorGraphSets, antennas=None) -> np.ndarray:
    """Channel energy per ORE over its users and receive antennas.

    By default sums over all candidate transmit antennas; ``antennas`` (one
    per user) restricts each user to a single antenna instead.
    """
    g = np.abs(H.h) ** 2                      # (U, R, N_t, N_r)
    E = np.zeros(len(sets.lam))
    for r, users in enumerate(sets.lam):
        for u in users:
            if antennas is None:
                E[r] += g[u, r].sum()
            else:
                E[r] += g[u, r, antennas[u]].sum()
    return E


def ore_energy_order(H: ChannelRealization, sets: FactorGraphSets, antennas=None) -> tuple:
    """OREs by descending energy, lower index first on ties."""
    E = ore_energies(H, sets, antennas)
    return tuple(sorted(range(len(E)), key=lambda r: (-E[r], r)))


def hypothesis_products(H: ChannelRealization, codebooks: CodebookSet,
                        sets: FactorGraphSets) -> np.ndarray:
    """``P[r, p, q, n_r] = h[u, r, q // M, n_r] * c_u[r, q % M]`` with u = lam[r][p]."""
    M = codebooks.M
    U, R, N_t, N_r = H.h.shape
    lam = np.array(sets.lam)                         # (R, d_f)
    rr = np.arange(R)[:, None]
    h = H.h[lam, rr]                                 # (R, d_f, N_t, N_r)
    c = codebooks.books[lam, rr]                     # (R, d_f, M)
    P = h[:, :, :, None, :] * c[:, :, None, :, None]  # (R, d_f, N_t, M, N_r)
    return P.reshape(R, lam.shape[1], N_t * M, N_r)


def combo_sums(P_r: np.ndarray, positions) -> np.ndarray:
    """Superposition of the listed positions over all their joint hypotheses.

    Returns shape (Q**k, N_r), lexicographic in the listed positions.
    """
    Q, N_r = P_r.shape[1:]
    acc = np.zeros((1, N_r), dtype=np.complex128)
    for p in positions:
        acc = (acc[:, None, :] + P_r[p][None, :, :]).reshape(-1, N_r)
    return acc


def lex_digits(idx: np.ndarray, Q: int, k: int) -> np.ndarray:
    """Digits (most significant first) of flat lexicographic indices in base Q."""
    idx = np.asarray(idx)
    out = np.empty(idx.shape + (k,), dtype=np.int64)
    for j in range(k - 1, -1, -1):
        out[..., j] = idx % Q
        idx = idx // Q
    return out


class BaseDecoder(BaseEstimator):
    """Common fit/validation logic. Subclasses implement ``_decode``."""

    name = "base"

    def fit(self, cfg: SystemConfig, codebooks: CodebookSet):
        if codebooks.F != cfg.indicator:
            raise ValueError("codebooks were built for a different indicator matrix")
        if codebooks.M != cfg.M:
            raise ValueError(f"codebooks have M={codebooks.M}, config has M={cfg.M}")
        self._validate_params(cfg)
        self.cfg_ = cfg
        self.codebooks_ = codebooks
        self.sets_ = codebooks.sets
        self.edge_index_ = _user_edges(self.sets_)
        return self

    def _validate_params(self, cfg: SystemConfig) -> None:
        pass

    def _check_input(self, rx: ReceivedSignal, H: ChannelRealization):
        check_is_fitted(self, "cfg_")
        cfg = self.cfg_
        if H.h.shape != (cfg.U, cfg.R, cfg.N_t, cfg.N_r):
            raise ValueError(f"channel shape {H.h.shape} does not match the fitted system")
        if rx.y.shape != (cfg.R, cfg.N_r):
            raise ValueError(f"signal shape {rx.y.shape} does not match the fitted system")

    def predict(self, rx: ReceivedSignal, H: ChannelRealization, **kw) -> DecodeResult:
        self._check_input(rx, H)
        counter = OpCounter()
        q, meta = self._decode(rx, H, counter, **kw)
        return DecodeResult(np.asarray(q, dtype=np.int64), counter.total(), self.name,
                            self.cfg_.M, meta)

    def decode(self, rx, H) -> list:
        return self.predict(rx, H).estimates

    def _decode(self, rx, H, counter, **kw):  # pragma: no cover - abstract
        raise NotImplementedError

    def _order(self, H, counter, meta, antennas=None):
        cfg = self.cfg_
        order = ore_energy_order(H, self.sets_, antennas)
        counter.charge(*ordering_cost(cfg.R, cfg.N_r, cfg.d_f))
        extra = (cfg.N_t - 1) * cfg.R * cfg.d_f * cfg.N_r if antennas is None else 0
        meta["ordering_surplus"] = OpCount(2 * extra, 2 * extra)
        meta["ore_order"] = order
        return order


def _user_edges(sets: FactorGraphSets) -> tuple:
    """Per user, the (ORE, position) pairs where it appears."""
    out = [[] for _ in sets.omega]
    for r, users in enumerate(sets.lam):
        for p, u in enumerate(users):
            out[u].append((r, p))
    return tuple(tuple(e) for e in out)


def level_metrics(y_r: np.ndarray, P_r: np.ndarray, known: dict, new_positions) -> np.ndarray:
    """Residual energy at one ORE for every joint hypothesis of the new positions.

    ``known`` maps position -> fixed message index.
    """
    base = y_r.copy()
    for p, q in known.items():
        base = base - P_r[p, q]
    S = combo_sums(P_r, new_positions)
    diff = base[None, :] - S
    return (diff.real ** 2 + diff.imag ** 2).sum(axis=1)

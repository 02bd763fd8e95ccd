"""Successive user detection (SUD) and its iterative refinement (MSUD)."""

from __future__ import annotations

import numpy as np

from ..complexity import residual_cost
from .base import BaseDecoder, hypothesis_products, level_metrics, lex_digits


class SUDecoder(BaseDecoder):
    """Detect users ORE by ORE, strongest ORE first.

    At each ORE the users already detected are subtracted and the remaining
    ones are found by exhaustive search over their joint hypotheses on that
    ORE alone. Stops as soon as every user has an estimate.

    Parameters
    ----------
    genie_order : bool
        Order OREs by the energy of the transmitted antennas instead of all
        candidate antennas. Needs ``true_q`` at predict time; diagnostics only.
    """

    name = "sud"

    def __init__(self, genie_order: bool = False):
        self.genie_order = genie_order

    def _decode(self, rx, H, counter, true_q=None):
        meta: dict = {}
        q = self._successive(rx, H, counter, meta, true_q)
        return q, meta

    def _successive(self, rx, H, counter, meta, true_q=None):
        cfg, sets = self.cfg_, self.sets_
        antennas = None
        if self.genie_order:
            if true_q is None:
                raise ValueError("genie ordering needs the transmitted messages")
            antennas = np.asarray(true_q) // cfg.M
        order = self._order(H, counter, meta, antennas)
        P = hypothesis_products(H, self.codebooks_, sets)
        adds, muls = residual_cost(cfg.N_r, cfg.d_f)
        est = np.full(cfg.U, -1, dtype=np.int64)
        steps = []
        for r in order:
            users = sets.lam[r]
            known = {p: int(est[u]) for p, u in enumerate(users) if est[u] >= 0}
            new = [p for p, u in enumerate(users) if est[u] < 0]
            if new:
                metrics = level_metrics(rx.y[r], P[r], known, new)
                best = int(np.argmin(metrics))
                for p, v in zip(new, lex_digits(np.array(best), cfg.Q, len(new))):
                    est[users[p]] = v
                counter.charge(adds, muls, times=metrics.size)
                steps.append((r, tuple(users[p] for p in new), float(metrics[best])))
            if (est >= 0).all():
                break
        meta["steps"] = steps
        return est


class MSUDecoder(SUDecoder):
    """SUD followed by per-user refinement over all of the user's OREs.

    Parameters
    ----------
    n_iter : int
        Refinement sweeps over all users; 0 returns the SUD answer.
    schedule : {"jacobi", "gauss-seidel"}
        ``jacobi`` holds interferers at the previous sweep's values;
        ``gauss-seidel`` uses updates from earlier users in the same sweep.
    """

    name = "msud"

    def __init__(self, n_iter: int = 4, schedule: str = "jacobi", genie_order: bool = False):
        self.n_iter = n_iter
        self.schedule = schedule
        self.genie_order = genie_order

    def _validate_params(self, cfg):
        if self.n_iter < 0:
            raise ValueError("n_iter must be non-negative")
        if self.schedule not in ("jacobi", "gauss-seidel"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def _decode(self, rx, H, counter, true_q=None):
        cfg, sets = self.cfg_, self.sets_
        meta: dict = {}
        est = self._successive(rx, H, counter, meta, true_q)
        P = hypothesis_products(H, self.codebooks_, sets)
        adds, muls = residual_cost(cfg.N_r, cfg.d_f)
        history = [est.copy()]
        for _ in range(self.n_iter):
            if self.schedule == "jacobi":
                est = self._sweep_jacobi(rx.y, P, est)
            else:
                for u in range(cfg.U):
                    est[u] = int(np.argmin(self.user_metrics(rx.y, P, est, u)))
            counter.charge(adds, muls, times=cfg.U * cfg.Q)
            history.append(est.copy())
        meta["iterations"] = self.n_iter
        meta["history"] = history
        return est, meta

    def user_metrics(self, y, P, est, u):
        """Residual over all OREs of user ``u`` for each of its hypotheses,
        other users held at ``est``."""
        total = np.zeros(self.cfg_.Q)
        for r, p in self.edge_index_[u]:
            base = y[r].copy()
            for j, v in enumerate(self.sets_.lam[r]):
                if j != p:
                    base = base - P[r, j, est[v]]
            diff = base[None, :] - P[r, p]
            total += (diff.real ** 2 + diff.imag ** 2).sum(axis=1)
        return total

    def _sweep_jacobi(self, y, P, est):
        lam = np.array(self.sets_.lam)                   # (R, d_f)
        R, d_f = lam.shape
        cur = P[np.arange(R)[:, None], np.arange(d_f)[None, :], est[lam]]   # (R, d_f, N_r)
        total = cur.sum(axis=1)                          # (R, N_r)
        # Residual with everybody except the edge's own user removed.
        base = y[:, None, :] - total[:, None, :] + cur   # (R, d_f, N_r)
        diff = base[:, :, None, :] - P                   # (R, d_f, Q, N_r)
        e = (diff.real ** 2 + diff.imag ** 2).sum(axis=3)
        metrics = np.zeros((self.cfg_.U, self.cfg_.Q))
        np.add.at(metrics, lam.ravel(), e.reshape(R * d_f, -1))
        return metrics.argmin(axis=1).astype(np.int64)

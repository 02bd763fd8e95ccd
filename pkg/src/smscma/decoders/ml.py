"""Exhaustive joint maximum-likelihood detection."""

from __future__ import annotations

import numpy as np

from ..complexity import residual_cost
from .base import BaseDecoder, GuardError, hypothesis_products, lex_digits


class MLDecoder(BaseDecoder):
    """Joint minimum-distance search over all (N_t M)^U hypotheses.

    The total distance splits into one table per ORE indexed by that ORE's
    users, so the search is a broadcast sum of R small tables followed by a
    flat ``argmin``. Flat index order is lexicographic with user 1 most
    significant, which makes ties go to the lowest hypothesis index.

    Parameters
    ----------
    guard : int
        Largest hypothesis count the decoder accepts.
    chunk : int
        Hypotheses evaluated per block, bounding memory.
    """

    name = "ml"

    def __init__(self, guard: int = 2**30, chunk: int = 2**21):
        self.guard = guard
        self.chunk = chunk

    def _validate_params(self, cfg):
        n = cfg.Q ** cfg.U
        if n > self.guard:
            raise GuardError(f"ML search needs {cfg.Q}^{cfg.U} = {n} hypotheses, guard is {self.guard}")

    def _decode(self, rx, H, counter):
        cfg, sets = self.cfg_, self.sets_
        Q, U = cfg.Q, cfg.U
        P = hypothesis_products(H, self.codebooks_, sets)
        tables = []
        for r, users in enumerate(sets.lam):
            S = np.zeros((1, cfg.N_r), dtype=np.complex128)
            for p in range(len(users)):
                S = (S[:, None, :] + P[r, p][None]).reshape(-1, cfg.N_r)
            d = rx.y[r][None, :] - S
            t = (d.real ** 2 + d.imag ** 2).sum(axis=1)
            shape = [1] * U
            for u in users:
                shape[u] = Q
            tables.append(t.reshape(shape))

        # Split the leading users' axes into blocks so each block fits the chunk budget.
        lead = 0
        while lead < U and Q ** (U - lead) > self.chunk:
            lead += 1
        tail_shape = (Q,) * (U - lead)
        best_val, best_idx = np.inf, 0
        for prefix in range(Q ** lead):
            digits = lex_digits(np.array(prefix), Q, lead) if lead else ()
            block = np.zeros(tail_shape)
            for t in tables:
                sub = t[tuple(int(digits[i]) if t.shape[i] > 1 else 0 for i in range(lead))] if lead else t
                block = block + sub
            i = int(np.argmin(block))
            v = block.flat[i]
            if v < best_val:
                best_val, best_idx = v, prefix * block.size + i
        n = Q ** U
        adds, muls = residual_cost(cfg.N_r, cfg.d_f)
        # Direct evaluation cost of every hypothesis: R residuals plus R-1 additions.
        counter.charge(cfg.R * (adds + 1) - 1, cfg.R * muls, times=n)
        return lex_digits(np.array(best_idx), Q, U), {"metric": float(best_val), "hypotheses": n}

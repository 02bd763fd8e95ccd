"""Sum-product message passing on the ORE/user factor graph.

Messages are carried in the log domain; every message, in either direction,
is normalised so its probabilities sum to one. The Gaussian constant in front of the
likelihood cancels under that normalisation and is dropped.

Operation charges follow the closed form of the reference accounting, with
log-domain additions standing in for the probability products they replace:

* per edge and joint hypothesis, once: the residual of that ORE
  (``N_r(4 d_f + 2) - 1`` adds, ``N_r(4 d_f + 2)`` muls) and one scaling by
  the noise variance (1 mul);
* per iteration, edge and joint hypothesis: ``d_f`` muls forming the
  weighted product (likelihood times the ``d_f - 1`` incoming messages,
  accumulated from unity); per iteration and edge: ``(N_t M)^{d_f} - 1`` adds
  for the marginalisation;
* per iteration and edge, the variable-node update: ``N_t M (d_v - 1)`` muls;
* final decision: ``N_t M (d_v - 1)`` muls per user.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..complexity import residual_cost
from .base import BaseDecoder, hypothesis_products

#: Floor on the noise variance so noiseless blocks remain decodable.
MIN_SIGMA2 = 1e-12


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


@dataclass
class MessageTable:
    """Log-domain messages indexed ``[r, position in lam[r], message]``."""

    vn_to_fn: np.ndarray
    fn_to_vn: np.ndarray

    def probabilities(self, direction: str = "vn_to_fn") -> np.ndarray:
        return np.exp(getattr(self, direction))


class MPADecoder(BaseDecoder):
    """Sum-product detector with a fixed number of iterations.

    Parameters
    ----------
    n_iter : int
        Number of FN->VN / VN->FN rounds (at least 1).
    record_messages : bool
        Keep a ``MessageTable`` snapshot after every round in the metadata.
    """

    name = "mpa"

    def __init__(self, n_iter: int = 5, record_messages: bool = False):
        self.n_iter = n_iter
        self.record_messages = record_messages

    def _validate_params(self, cfg):
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")

    def _decode(self, rx, H, counter):
        cfg, sets = self.cfg_, self.sets_
        Q, d_f, R = cfg.Q, cfg.d_f, cfg.R
        sigma2 = max(rx.sigma2, MIN_SIGMA2)
        P = hypothesis_products(H, self.codebooks_, sets)
        shape = (Q,) * d_f
        n_comb = Q ** d_f
        res_adds, res_muls = residual_cost(cfg.N_r, d_f)

        # Log-likelihood of every joint hypothesis, per edge.
        loglik = np.empty((R, d_f) + shape)
        for r in range(R):
            for p in range(d_f):
                S = np.zeros((1, cfg.N_r), dtype=np.complex128)
                for j in range(d_f):
                    S = (S[:, None, :] + P[r, j][None]).reshape(-1, cfg.N_r)
                diff = rx.y[r][None, :] - S
                dist = (diff.real ** 2 + diff.imag ** 2).sum(axis=1)
                loglik[r, p] = (-dist / sigma2).reshape(shape)
                counter.charge(res_adds, res_muls + 1, times=n_comb)

        v2f = np.full((R, d_f, Q), -np.log(Q))
        f2v = np.zeros((R, d_f, Q))
        history = []
        edges = self.edge_index_
        for _ in range(self.n_iter):
            for r in range(R):
                for p in range(d_f):
                    w = loglik[r, p].copy()
                    for j in range(d_f):
                        if j != p:
                            sh = [1] * d_f
                            sh[j] = Q
                            w += v2f[r, j].reshape(sh)
                    w = np.moveaxis(w, p, 0).reshape(Q, -1)
                    msg = _logsumexp_rows(w)
                    f2v[r, p] = msg - _logsumexp_rows(msg[None, :])[0]
                    counter.charge(n_comb - 1, d_f * n_comb)
            new_v2f = np.empty_like(v2f)
            for u, user_edges in enumerate(edges):
                for r, p in user_edges:
                    acc = np.zeros(Q)
                    for r2, p2 in user_edges:
                        if r2 != r:
                            acc += f2v[r2, p2]
                    new_v2f[r, p] = acc - _logsumexp_rows(acc[None, :])[0]
                    counter.charge(0, Q * (cfg.d_v - 1))
            v2f = new_v2f
            if self.record_messages:
                history.append(MessageTable(v2f.copy(), f2v.copy()))

        q = np.empty(cfg.U, dtype=np.int64)
        for u, user_edges in enumerate(edges):
            belief = np.zeros(Q)
            for r, p in user_edges:
                belief += f2v[r, p]
            q[u] = int(np.argmax(belief))
            counter.charge(0, Q * (cfg.d_v - 1))
        meta = {"iterations": self.n_iter}
        if self.record_messages:
            meta["messages"] = history
        return q, meta

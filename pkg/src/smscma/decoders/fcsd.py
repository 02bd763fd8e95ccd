"""Fixed-complexity breadth-first tree search over the ORE levels."""

from __future__ import annotations

import math

import numpy as np

from ..complexity import fcsd_node_cost
from .base import BaseDecoder, build_tree_levels, combo_sums, hypothesis_products


class FCSDecoder(BaseDecoder):
    """Keep the ``rho[r]`` best partial paths after each of the first R-1 levels.

    Levels are OREs in descending-energy order. A node's metric accumulates
    the residual energy of every ORE visited so far; each level expands every
    survivor over the joint hypotheses of the users first seen at that ORE.
    ``rho`` entries may be ``inf`` (keep everything); counts above the
    number of available nodes are clamped and the clamp is reported.

    Parameters
    ----------
    rho : sequence of int or inf
        Survivors after levels 1..R-1.
    record_tree : bool
        Store each level's parent links and metrics in the metadata.
    """

    name = "fcsd"

    def __init__(self, rho=(35, 70, 50), record_tree: bool = False, genie_order: bool = False):
        self.rho = rho
        self.record_tree = record_tree
        self.genie_order = genie_order

    def _validate_params(self, cfg):
        if len(self.rho) != cfg.R - 1:
            raise ValueError(f"rho needs {cfg.R - 1} entries, got {len(self.rho)}")
        if any(v < 0 for v in self.rho):
            raise ValueError("rho entries must be non-negative")

    def _decode(self, rx, H, counter, true_q=None):
        cfg, sets = self.cfg_, self.sets_
        Q, U = cfg.Q, cfg.U
        meta: dict = {}
        antennas = None
        if self.genie_order:
            antennas = np.asarray(true_q) // cfg.M
        order = self._order(H, counter, meta, antennas)
        plan = build_tree_levels(sets, order)
        P = hypothesis_products(H, self.codebooks_, sets)
        node_adds, node_muls = fcsd_node_cost(cfg)

        assign = np.full((1, U), -1, dtype=np.int64)
        metric = np.zeros(1)
        kept, clamped, tree = [], [], []
        visited = 0
        for level, (r, fresh) in enumerate(zip(plan.order, plan.new_users)):
            users = sets.lam[r]
            new_pos = [users.index(u) for u in fresh]
            known_pos = [p for p, u in enumerate(users) if u not in fresh]
            base = np.broadcast_to(rx.y[r], (len(metric), cfg.N_r)).copy()
            for p in known_pos:
                base -= P[r, p][assign[:, users[p]]]
            S = combo_sums(P[r], new_pos)                     # (Q^k, N_r)
            diff = base[:, None, :] - S[None, :, :]
            e = (diff.real ** 2 + diff.imag ** 2).sum(axis=2)  # (nodes, Q^k)
            n_child = e.shape[1]
            child_metric = (metric[:, None] + e).ravel()
            parent = np.repeat(np.arange(len(metric)), n_child)
            child_assign = assign[parent]
            if fresh:
                combo = np.tile(np.arange(n_child), len(metric))
                for j, u in enumerate(fresh):
                    child_assign[:, u] = (combo // Q ** (len(fresh) - 1 - j)) % Q
            visited += child_metric.size
            if self.record_tree:
                tree.append({"ore": r, "parent": parent, "metric": child_metric,
                             "parent_metric": metric[parent]})
            if level < len(plan.order) - 1:
                want = self.rho[level]
                keep = int(min(max(want, 1), child_metric.size))
                if keep != want and not (want == math.inf and keep == child_metric.size):
                    clamped.append((level, want, keep))
                sel = np.argsort(child_metric, kind="stable")[:keep]
                kept.append(keep)
                if self.record_tree:
                    tree[-1]["kept"] = sel
                assign, metric = child_assign[sel], child_metric[sel]
            else:
                best = int(np.argmin(child_metric))
                assign, metric = child_assign[best:best + 1], child_metric[best:best + 1]
        counter.charge(node_adds, node_muls, times=visited)
        meta.update(plan=plan, kept=kept, clamped=clamped, nodes=visited, metric=float(metric[0]))
        if self.record_tree:
            meta["tree"] = tree
        return assign[0], meta

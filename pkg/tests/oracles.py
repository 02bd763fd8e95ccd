"""Loop-based reference computations, independent of the vectorised decoders."""

import itertools

import math

import numpy as np
from scipy import integrate, special


def contribution(H, cb, u, r, q):
    M = cb.M
    return H.h[u, r, q // M, :] * cb.books[u, r, q % M]


def joint_metric(y, H, cb, q):
    """Sum over antennas of || y - sum_u diag(h_u) c_u ||^2, straight from the definition."""
    U, R = cb.U, cb.R
    total = 0.0
    for n in range(y.shape[1]):
        for r in range(R):
            z = y[r, n]
            for u in range(U):
                z -= H.h[u, r, q[u] // cb.M, n] * cb.books[u, r, q[u] % cb.M]
            total += abs(z) ** 2
    return total


def brute_ml(y, H, cb, Q):
    best, arg = np.inf, None
    for hyp in itertools.product(range(Q), repeat=cb.U):
        v = joint_metric(y, H, cb, hyp)
        if v < best:
            best, arg = v, hyp
    return np.array(arg), best


def ore_residual(y, H, cb, r, assignment):
    """sum_n |y_r,n - sum_{u in assignment} h c|^2 for a dict user -> message."""
    z = y[r].copy()
    for u, q in assignment.items():
        z = z - contribution(H, cb, u, r, q)
    return float(np.sum(np.abs(z) ** 2))


def energy_per_ore(H, lam):
    E = []
    for r, users in enumerate(lam):
        s = 0.0
        for u in users:
            for nt in range(H.h.shape[2]):
                for nr in range(H.h.shape[3]):
                    s += abs(H.h[u, r, nt, nr]) ** 2
        E.append(s)
    return E


def greedy_tree(y, H, cb, lam, order, Q):
    """One survivor per level: at each ORE pick the best joint hypothesis of its new users."""
    est = {}
    for r in order:
        new = [u for u in lam[r] if u not in est]
        if not new:
            continue
        best, arg = np.inf, None
        for hyp in itertools.product(range(Q), repeat=len(new)):
            trial = {u: est[u] for u in lam[r] if u in est}
            trial.update(zip(new, hyp))
            v = ore_residual(y, H, cb, r, trial)
            if v < best:
                best, arg = v, hyp
        est.update(zip(new, arg))
    return np.array([est[u] for u in range(cb.U)])


def density(d, alpha2, sigma2, order):
    """Metric density written from scratch: sum of `order` |a_i + n_i|^2, n_i ~ CN(0, sigma2)."""
    if d <= 0:
        return 0.0
    if alpha2 == 0:
        return d ** (order - 1) * math.exp(-d / sigma2) / (sigma2 ** order * math.gamma(order))
    x = 2 * math.sqrt(alpha2 * d) / sigma2
    return ((d / alpha2) ** ((order - 1) / 2) / sigma2
            * math.exp(-(math.sqrt(d) - math.sqrt(alpha2)) ** 2 / sigma2) * special.ive(order - 1, x))


def quad_cdf(alpha2, sigma2, gamma, order):
    val, _ = integrate.quad(density, 0, gamma, args=(alpha2, sigma2, order),
                            epsabs=1e-13, epsrel=1e-12, limit=400)
    return val

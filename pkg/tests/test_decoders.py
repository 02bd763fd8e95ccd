import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from smscma.decoders import (FCSDecoder, GuardError, MLDecoder, MPADecoder, MSUDecoder, SUDecoder,
                             build_tree_levels, decode_ml, make_decoder, ore_energies, ore_energy_order)
from smscma.model import SystemConfig, derive_factor_graph, DEFAULT_INDICATOR
from smscma.signal import ChannelRealization, draw_channel, transmit_and_receive

from oracles import brute_ml, energy_per_ore, greedy_tree, ore_residual


def realization(cfg, cb, seed, snr_db):
    rng = np.random.default_rng(seed)
    q = rng.integers(0, cfg.Q, cfg.U)
    H = draw_channel(rng, cfg)
    return q, H, transmit_and_receive(q, H, cb, snr_db, rng)


# --- ML -------------------------------------------------------------------

def test_ml_noiseless_small(small_cfg, cb2):
    dec = MLDecoder().fit(small_cfg, cb2)
    for seed in range(10):
        q, H, rx = realization(small_cfg, cb2, seed, math.inf)
        assert np.array_equal(dec.predict(rx, H).q, q)


@pytest.mark.parametrize("snr", [0.0, 5.0])
def test_ml_single_user_matches_scan(single_user_cfg, single_user_cb, snr):
    for seed in range(20):
        q, H, rx = realization(single_user_cfg, single_user_cb, seed, snr)
        got = decode_ml(rx, H, single_user_cb, single_user_cfg)
        want, _ = brute_ml(rx.y, H, single_user_cb, 4)
        assert np.array_equal(got.q, want)


def test_ml_matches_definition_on_small_system(small_cfg, cb2):
    # 4^6 = 4096 hypotheses evaluated term by term.
    q, H, rx = realization(small_cfg, cb2, 77, 3.0)
    got = decode_ml(rx, H, cb2, small_cfg)
    want, best = brute_ml(rx.y, H, cb2, 4)
    assert np.array_equal(got.q, want)
    assert got.metadata["metric"] == pytest.approx(best, rel=1e-12)


def test_ml_chunking_does_not_change_answer(small_cfg, cb2):
    q, H, rx = realization(small_cfg, cb2, 4, 2.0)
    a = MLDecoder().fit(small_cfg, cb2).predict(rx, H).q
    b = MLDecoder(chunk=16).fit(small_cfg, cb2).predict(rx, H).q
    assert np.array_equal(a, b)


def test_ml_guard(cb4):
    MLDecoder()._validate_params(SystemConfig(N_t=4, M=4))   # 16^6 ~ 1.7e7 hypotheses is allowed
    big = SystemConfig(U=8, R=4, N_t=8, M=8, F=((1, 1, 1, 1, 0, 0, 0, 0), (0, 0, 0, 0, 1, 1, 1, 1),
                                              (1, 1, 0, 0, 1, 1, 0, 0), (0, 0, 1, 1, 0, 0, 1, 1)))
    with pytest.raises(GuardError):
        MLDecoder()._validate_params(big)                     # 64^8 = 2^48


# --- MPA ------------------------------------------------------------------

def test_mpa_uniform_start_equals_explicit_marginal(cfg3, cb2):
    """After one round, FN->VN equals the normalised likelihood marginal under uniform priors."""
    q, H, rx = realization(cfg3, cb2, 3, 6.0)
    res = MPADecoder(n_iter=1, record_messages=True).fit(cfg3, cb2).predict(rx, H)
    f2v = res.metadata["messages"][0].probabilities("fn_to_vn")
    sets = cb2.sets
    r, p = 2, 1
    users = sets.lam[r]
    marg = np.zeros(cfg3.Q)
    for hyp in itertools.product(range(cfg3.Q), repeat=3):
        d = ore_residual(rx.y, H, cb2, r, dict(zip(users, hyp)))
        marg[hyp[p]] += math.exp(-d / rx.sigma2) * (1 / 8) ** 2
    assert np.allclose(f2v[r, p], marg / marg.sum(), rtol=1e-9, atol=1e-14)


def test_mpa_high_snr_recovers_truth(cfg3, cb2):
    dec = MPADecoder(n_iter=5).fit(cfg3, cb2)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        q = rng.integers(0, 8, 6)
        H = draw_channel(rng, cfg3)
        rx = transmit_and_receive(q, H, cb2, 40.0, rng)         # sigma2 = 1e-4
        assert np.array_equal(dec.predict(rx, H).q, q)


def test_mpa_noiseless(cfg3, cb2):
    dec = MPADecoder(n_iter=5).fit(cfg3, cb2)
    for seed in range(10):
        q, H, rx = realization(cfg3, cb2, seed, math.inf)
        assert np.array_equal(dec.predict(rx, H).q, q)


@given(st.integers(0, 2**31), st.floats(-5, 20), st.integers(1, 6))
@settings(max_examples=25, deadline=None)
def test_mpa_messages_normalised(seed, snr, K):
    cfg = SystemConfig(N_t=4, M=2, N_r=2)
    from smscma.model import resolve_codebooks
    cb = resolve_codebooks(cfg)
    q, H, rx = realization(cfg, cb, seed, snr)
    res = MPADecoder(n_iter=K, record_messages=True).fit(cfg, cb).predict(rx, H)
    assert len(res.metadata["messages"]) == K
    for table in res.metadata["messages"]:
        for direction in ("vn_to_fn", "fn_to_vn"):
            p = table.probabilities(direction)
            assert (p >= 0).all()
            assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-9)


def test_mpa_rejects_zero_iterations(cfg3, cb2):
    with pytest.raises(ValueError):
        MPADecoder(n_iter=0).fit(cfg3, cb2)


# --- ordering and level plans --------------------------------------------

def test_energy_order_unit_gains():
    cfg = SystemConfig(N_r=3)
    H = ChannelRealization(np.ones((6, 4, 4, 3), dtype=complex))
    sets = cfg.sets
    assert np.allclose(ore_energies(H, sets), cfg.N_r * cfg.d_f * cfg.N_t)
    assert ore_energy_order(H, sets) == (0, 1, 2, 3)


def test_energy_order_doubled_ore():
    cfg = SystemConfig()
    h = np.ones((6, 4, 4, 4), dtype=complex)
    h[:, 2] *= 2
    assert ore_energy_order(ChannelRealization(h), cfg.sets)[0] == 2


def test_energy_order_matches_loop_oracle(cfg3):
    sets = cfg3.sets
    for seed in range(20):
        H = draw_channel(np.random.default_rng(seed), cfg3)
        E = energy_per_ore(H, sets.lam)
        assert np.allclose(ore_energies(H, sets), E)
        assert list(ore_energy_order(H, sets)) == sorted(range(4), key=lambda r: (-E[r], r))


@pytest.mark.parametrize("order", list(itertools.permutations(range(4))))
def test_level_plan_any_order(order):
    sets = derive_factor_graph(DEFAULT_INDICATOR)
    plan = build_tree_levels(sets, order)
    assert plan.u_sequence == (3, 2, 1, 0)
    flat = [u for level in plan.new_users for u in level]
    assert sorted(flat) == list(range(6))
    assert plan.fes_levels == (0, 1, 2) and plan.ses_levels == (3,)


# --- SUD / MSUD -----------------------------------------------------------

@pytest.mark.parametrize("eta_cfg", [dict(N_t=4, M=2), dict(N_t=4, M=4)])
def test_sud_noiseless(eta_cfg, cb2, cb4):
    cfg = SystemConfig(N_r=2, **eta_cfg)
    cb = cb2 if cfg.M == 2 else cb4
    dec = SUDecoder().fit(cfg, cb)
    for seed in range(10):
        q, H, rx = realization(cfg, cb, seed, math.inf)
        res = dec.predict(rx, H)
        assert np.array_equal(res.q, q)
        assert [len(s[1]) for s in res.metadata["steps"]] == [3, 2, 1]


def test_sud_stages_match_brute_force(cfg3, cb2):
    dec = SUDecoder().fit(cfg3, cb2)
    for seed in range(5):
        q, H, rx = realization(cfg3, cb2, seed, 4.0)
        res = dec.predict(rx, H)
        est = {}
        for r, new_users, value in res.metadata["steps"]:
            known = {u: est[u] for u in cb2.sets.lam[r] if u in est}
            best, arg = np.inf, None
            for hyp in itertools.product(range(8), repeat=len(new_users)):
                v = ore_residual(rx.y, H, cb2, r, {**known, **dict(zip(new_users, hyp))})
                if v < best:
                    best, arg = v, hyp
            assert value == pytest.approx(best, rel=1e-12)
            est.update(zip(new_users, arg))
        assert np.array_equal(res.q, [est[u] for u in range(6)])


def test_msud_zero_iterations_is_sud(cfg3, cb2):
    for seed in range(5):
        q, H, rx = realization(cfg3, cb2, seed, 2.0)
        a = SUDecoder().fit(cfg3, cb2).predict(rx, H).q
        b = MSUDecoder(n_iter=0).fit(cfg3, cb2).predict(rx, H).q
        assert np.array_equal(a, b)


def test_msud_noiseless_fixed_point(cfg3, cb2):
    dec = MSUDecoder(n_iter=4).fit(cfg3, cb2)
    for seed in range(10):
        q, H, rx = realization(cfg3, cb2, seed, math.inf)
        res = dec.predict(rx, H)
        assert all(np.array_equal(h, q) for h in res.metadata["history"])


@pytest.mark.parametrize("schedule", ["jacobi", "gauss-seidel"])
def test_msud_refit_matches_brute_force(cfg3, cb2, schedule):
    """Replay each sweep with a per-user loop that subtracts interferers explicitly."""
    dec = MSUDecoder(n_iter=3, schedule=schedule).fit(cfg3, cb2)
    sets = cb2.sets
    for seed in range(5):
        q, H, rx = realization(cfg3, cb2, seed, 3.0)
        hist = dec.predict(rx, H).metadata["history"]
        for prev, nxt in zip(hist[:-1], hist[1:]):
            cur = prev.copy()
            for u in range(6):
                ref = prev if schedule == "jacobi" else cur
                scores = []
                for cand in range(8):
                    s = 0.0
                    for r in sets.omega[u]:
                        assign = {v: ref[v] for v in sets.lam[r] if v != u}
                        assign[u] = cand
                        s += ore_residual(rx.y, H, cb2, r, assign)
                    scores.append(s)
                cur[u] = int(np.argmin(scores))
            assert np.array_equal(cur, nxt)


# --- FCSD -----------------------------------------------------------------

def test_fcsd_keep_all_equals_ml(small_cfg, cb2):
    fc = FCSDecoder(rho=(math.inf,) * 3).fit(small_cfg, cb2)
    ml = MLDecoder().fit(small_cfg, cb2)
    for seed in range(30):
        q, H, rx = realization(small_cfg, cb2, seed, [0.0, 10.0, 20.0][seed % 3])
        assert np.array_equal(fc.predict(rx, H).q, ml.predict(rx, H).q)


def test_fcsd_greedy_matches_oracle(cfg3, cb2):
    dec = FCSDecoder(rho=(1, 1, 1)).fit(cfg3, cb2)
    for seed in range(10):
        q, H, rx = realization(cfg3, cb2, seed, 2.0)
        res = dec.predict(rx, H)
        order = res.metadata["ore_order"]
        assert np.array_equal(res.q, greedy_tree(rx.y, H, cb2, cb2.sets.lam, order, 8))


def test_fcsd_greedy_equals_sud(cfg3, cb2):
    for seed in range(10):
        q, H, rx = realization(cfg3, cb2, seed, 1.0)
        a = FCSDecoder(rho=(1, 1, 1)).fit(cfg3, cb2).predict(rx, H).q
        b = SUDecoder().fit(cfg3, cb2).predict(rx, H).q
        assert np.array_equal(a, b)


def test_fcsd_clamps_large_rho(cfg3, cb2):
    q, H, rx = realization(cfg3, cb2, 1, 5.0)
    res = FCSDecoder(rho=(10_000, 1, 1)).fit(cfg3, cb2).predict(rx, H)
    assert res.metadata["kept"][0] == 512
    assert res.metadata["clamped"] == [(0, 10_000, 512)]


def test_fcsd_metric_monotone_along_branches(cfg3, cb2):
    dec = FCSDecoder(rho=(35, 70, 50), record_tree=True).fit(cfg3, cb2)
    for seed in range(100):
        q, H, rx = realization(cfg3, cb2, seed, [0.0, 6.0, 12.0][seed % 3])
        for level in dec.predict(rx, H).metadata["tree"]:
            assert (level["metric"] >= level["parent_metric"]).all()


@given(st.integers(0, 2**31), st.floats(-3, 15),
       st.lists(st.integers(1, 40), min_size=3, max_size=3), st.integers(0, 40))
@settings(max_examples=30, deadline=None)
def test_fcsd_nesting(seed, snr, rho, extra):
    """Growing only the last survivor count keeps earlier survivors, so the final
    candidates form a superset; keep-all is never beaten.

    Growing an earlier count carries no such guarantee: extra early paths can
    push the eventual best path out of a later fixed-size cut.
    """
    cfg = SystemConfig(N_t=4, M=2, N_r=2)
    from smscma.model import resolve_codebooks
    cb = resolve_codebooks(cfg)
    q, H, rx = realization(cfg, cb, seed, snr)
    metric = lambda r: FCSDecoder(rho=tuple(r)).fit(cfg, cb).predict(rx, H).metadata["metric"]
    small = metric(rho)
    big = metric(rho[:2] + [rho[2] + extra])
    full = metric([math.inf] * 3)
    assert full <= big + 1e-12 and big <= small + 1e-12


# --- estimator protocol ----------------------------------------------------

@pytest.mark.parametrize("name", ["ml", "mpa", "sud", "msud", "fcsd"])
def test_deterministic_and_clonable(name, small_cfg, cb2):
    dec = make_decoder(name, small_cfg)
    fresh = clone(dec)
    assert fresh.get_params() == dec.get_params()
    dec.fit(small_cfg, cb2)
    q, H, rx = realization(small_cfg, cb2, 8, 5.0)
    a, b = dec.predict(rx, H), dec.predict(rx, H)
    assert np.array_equal(a.q, b.q) and a.ops == b.ops
    assert len(a.estimates) == 6
    assert all(0 <= m.antenna < 2 and 0 <= m.codeword < 2 for m in a.estimates)


def test_set_params(cfg3, cb2):
    dec = FCSDecoder().set_params(rho=(15, 50, 15))
    assert dec.get_params()["rho"] == (15, 50, 15)


def test_predict_before_fit(cfg3, cb2):
    from sklearn.exceptions import NotFittedError
    q, H, rx = realization(cfg3, cb2, 0, 5.0)
    with pytest.raises(NotFittedError):
        SUDecoder().predict(rx, H)


def test_shape_mismatch(cfg3, cb2):
    dec = SUDecoder().fit(cfg3, cb2)
    q, H, rx = realization(SystemConfig(N_t=4, M=2, N_r=4), cb2, 0, 5.0)
    with pytest.raises(ValueError):
        dec.predict(rx, H)


def test_genie_order_uses_true_antennas(cfg3, cb2):
    q, H, rx = realization(cfg3, cb2, 2, 5.0)
    res = SUDecoder(genie_order=True).fit(cfg3, cb2).predict(rx, H, true_q=q)
    assert res.metadata["ore_order"] == ore_energy_order(H, cb2.sets, q // cfg3.M)

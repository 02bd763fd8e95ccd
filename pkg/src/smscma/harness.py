"""Monte-Carlo engine: BER sweeps and number-of-misses (NoM) studies.

Every trial draws its own generator from ``(seed, snr index, trial index)``,
so results do not depend on how trials are split across workers and a run
can be extended without changing its first trials.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .decoders import make_decoder
from .model import CodebookSet, SystemConfig
from .signal import draw_channel, index_bits, transmit_and_receive

CSV_HEADER = ["snr_db", "decoder", "trials", "bit_errors", "ber", "ber_stderr",
              "nom", "adds_avg", "muls_avg"]
NOISELESS = math.inf


def trial_rng(seed: int, snr_index: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(snr_index), int(trial)))
    return np.random.default_rng(ss)


@dataclass
class TrialRecord:
    trial: int
    bits: np.ndarray                 # (U, eta)
    q: np.ndarray                    # transmitted message indices
    estimates: Dict[str, np.ndarray]
    bit_errors: Dict[str, int]
    ops: Dict[str, tuple]


def _fitted(cfg, codebooks, decoders):
    out = {}
    for item in decoders:
        if isinstance(item, str):
            out[item] = make_decoder(item, cfg).fit(cfg, codebooks)
        else:
            label, dec = item
            out[label] = dec.fit(cfg, codebooks)
    return out


def run_trial(cfg: SystemConfig, codebooks: CodebookSet, snr_db: float, rng: np.random.Generator,
              decoders, trial: int = 0) -> TrialRecord:
    """One realization: random bits, one channel, one noise draw, every decoder on the same (y, H).

    ``decoders`` is a mapping label -> fitted decoder, or a list of names.
    """
    if not isinstance(decoders, dict):
        decoders = _fitted(cfg, codebooks, decoders)
    eta = cfg.eta
    bits = rng.integers(0, 2, size=(cfg.U, eta))
    q = (bits << np.arange(eta - 1, -1, -1)).sum(axis=1)
    H = draw_channel(rng, cfg)
    rx = transmit_and_receive(q, H, codebooks, snr_db, rng)
    est, errs, ops = {}, {}, {}
    for label, dec in decoders.items():
        res = dec.predict(rx, H)
        est[label] = res.q
        errs[label] = int((index_bits(res.q, eta) != bits).sum())
        ops[label] = (res.ops.real_adds, res.ops.real_muls)
    return TrialRecord(trial, bits, q, est, errs, ops)


# Worker processes rebuild the fitted decoders once per chunk.
def _run_chunk(args):
    cfg, codebooks, decoders, snr_index, snr_db, trials = args
    fitted = _fitted(cfg, codebooks, decoders)
    out = []
    for t in trials:
        rec = run_trial(cfg, codebooks, snr_db, trial_rng(cfg.seed, snr_index, t), fitted, t)
        out.append(rec)
    return out


def default_workers() -> int:
    env = os.environ.get("SMSCMA_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def _map_trials(cfg, codebooks, decoders, snr_index, snr_db, n_trials, workers):
    trials = list(range(n_trials))
    if workers <= 1 or n_trials < 2:
        return _run_chunk((cfg, codebooks, decoders, snr_index, snr_db, trials))
    n_chunks = min(n_trials, workers * 4)
    bounds = np.linspace(0, n_trials, n_chunks + 1).astype(int)
    chunks = [(cfg, codebooks, decoders, snr_index, snr_db, trials[a:b])
              for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, chunks))
    return [rec for part in parts for rec in part]


@dataclass
class PointStats:
    snr_db: float
    decoder: str
    trials: int
    bit_errors: int
    bits: int
    nom: float = math.nan
    nom_stderr: float = math.nan
    adds_avg: float = math.nan
    muls_avg: float = math.nan

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def ber_stderr(self) -> float:
        p = self.ber
        return math.sqrt(p * (1 - p) / self.bits)


@dataclass
class SweepResult:
    points: List[PointStats] = field(default_factory=list)
    records: Dict[float, List[TrialRecord]] = field(default_factory=dict)

    def get(self, snr_db: float, decoder: str) -> PointStats:
        for p in self.points:
            if p.snr_db == snr_db and p.decoder == decoder:
                return p
        raise KeyError((snr_db, decoder))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow([_fmt(p.snr_db), p.decoder, p.trials, p.bit_errors, _fmt(p.ber),
                        _fmt(p.ber_stderr), _fmt(p.nom), _fmt(p.adds_avg), _fmt(p.muls_avg)])
        return buf.getvalue()

    def to_report(self) -> dict:
        return {"points": [
            {"snr_db": _fmt(p.snr_db), "decoder": p.decoder, "trials": p.trials,
             "bit_errors": p.bit_errors, "ber": p.ber, "ber_stderr": p.ber_stderr,
             "nom": None if math.isnan(p.nom) else p.nom,
             "nom_stderr": None if math.isnan(p.nom_stderr) else p.nom_stderr,
             "adds_avg": p.adds_avg, "muls_avg": p.muls_avg} for p in self.points]}

    def to_json(self) -> str:
        return json.dumps(self.to_report(), indent=1, sort_keys=True)


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def aggregate(cfg: SystemConfig, snr_db: float, records: Sequence[TrialRecord],
              reference: Optional[str] = "mpa") -> List[PointStats]:
    """Reduce trial records (in trial order) to one row per decoder."""
    labels = list(records[0].estimates) if records else []
    n = len(records)
    out = []
    for label in labels:
        errs = sum(r.bit_errors[label] for r in records)
        ops = np.array([r.ops[label] for r in records], dtype=float)
        st = PointStats(snr_db, label, n, errs, n * cfg.U * cfg.eta,
                        adds_avg=float(ops[:, 0].mean()), muls_avg=float(ops[:, 1].mean()))
        if reference in labels:
            st.nom, st.nom_stderr = nom_stats(records, label, reference)
        out.append(st)
    return out


def misses(records: Sequence[TrialRecord], label: str, reference: str = "mpa") -> np.ndarray:
    """Per-trial count of users whose ``label`` estimate differs from ``reference``."""
    return np.array([int((r.estimates[label] != r.estimates[reference]).sum()) for r in records])


def nom_stats(records, label, reference="mpa") -> tuple:
    m = misses(records, label, reference)
    se = float(m.std(ddof=1) / math.sqrt(len(m))) if len(m) > 1 else math.nan
    return float(m.mean()), se


def run_sweep(cfg: SystemConfig, codebooks: CodebookSet, decoders: Sequence, trials: int,
              snr_db_list: Optional[Iterable[float]] = None, workers: Optional[int] = None,
              keep_records: bool = False) -> SweepResult:
    """BER (and NoM against MPA, when MPA is in the set) for each SNR point."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    snrs = list(cfg.snr_db_list if snr_db_list is None else snr_db_list)
    workers = default_workers() if workers is None else workers
    result = SweepResult()
    for i, snr in enumerate(snrs):
        recs = _map_trials(cfg, codebooks, list(decoders), i, snr, trials, workers)
        result.points.extend(aggregate(cfg, snr, recs))
        if keep_records:
            result.records[snr] = recs
    return result


@dataclass
class NomPoint:
    snr_db: float
    rho: tuple
    trials: int
    nom: float
    nom_stderr: float


def rho_label(rho) -> str:
    return "fcsd[" + ",".join("inf" if v == math.inf else str(int(v)) for v in rho) + "]"


def run_nom(cfg: SystemConfig, codebooks: CodebookSet, rho_variants: Sequence[Sequence[float]],
            trials: int, snr_db_list: Optional[Iterable[float]] = None,
            workers: Optional[int] = None) -> tuple:
    """NoM of FCSD against MPA for each survivor-count variant.

    Returns ``(points, records)``; records keep the per-trial estimates so
    paired comparisons between variants are possible.
    """
    from .decoders import FCSDecoder, MPADecoder

    decs = [("mpa", MPADecoder(n_iter=cfg.K_mpa))]
    for rho in rho_variants:
        decs.append((rho_label(rho), FCSDecoder(rho=tuple(rho))))
    snrs = list(cfg.snr_db_list if snr_db_list is None else snr_db_list)
    workers = default_workers() if workers is None else workers
    points, records = [], {}
    for i, snr in enumerate(snrs):
        recs = _map_trials(cfg, codebooks, decs, i, snr, trials, workers)
        records[snr] = recs
        for rho in rho_variants:
            nom, se = nom_stats(recs, rho_label(rho))
            points.append(NomPoint(snr, tuple(rho), trials, nom, se))
    return points, records


def nom_csv(points: Sequence[NomPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "rho", "trials", "nom", "nom_stderr"])
    for p in points:
        w.writerow([_fmt(p.snr_db), " ".join(_fmt(float(v)) if v == math.inf else str(int(v)) for v in p.rho),
                    p.trials, _fmt(p.nom), _fmt(p.nom_stderr)])
    return buf.getvalue()

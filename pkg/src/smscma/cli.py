"""Command-line front end: ``smscma {simulate,complexity,nom,validate}``.

Exit codes: 0 success, 2 configuration error, 3 decoder guard violation,
4 I/O error. ``SMSCMA_WORKERS`` sets the default worker count.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .complexity import (formula_fcsd, formula_mpa, formula_msud, formula_sud)
from .decoders import GuardError, build_tree_levels, make_decoder
from .harness import default_workers, nom_csv, run_nom, run_sweep, trial_rng
from .model import (CodebookError, ConfigError, SystemConfig, load_config, resolve_codebooks,
                    spectral_efficiency)
from .signal import draw_channel, transmit_and_receive

EXIT_CONFIG, EXIT_GUARD, EXIT_IO = 2, 3, 4
DECODER_NAMES = ("ml", "mpa", "sud", "msud", "fcsd")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def parse_snr(text: str) -> list:
    """``start:step:stop`` (inclusive) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("expected start:step:stop", "--snr")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError("need step > 0 and stop >= start", "--snr")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(v) for v in text.split(",") if v]


def parse_rho(text: str) -> tuple:
    vals = []
    for v in text.split(","):
        v = v.strip()
        vals.append(math.inf if v in ("inf", "all") else int(v))
    return tuple(vals)


def _load(args):
    cfg = load_config(args.config) if args.config else SystemConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    codebook = getattr(args, "codebook", None)
    if codebook is None and args.config:
        raw = json.loads(Path(args.config).read_text())
        if "codebook" in raw:
            codebook = Path(args.config).parent / raw["codebook"]
    cb = resolve_codebooks(cfg, codebook)
    return cfg, cb, codebook


def manifest(cfg, cb, codebook_path, extra) -> dict:
    return {
        "tool": "smscma", "version": __version__,
        "config": cfg.to_dict(),
        "codebook_path": str(codebook_path) if codebook_path else None,
        "codebook_sha256": cb.checksum(),
        "seed": int(cfg.seed),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **extra,
    }


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def cmd_simulate(args) -> int:
    if args.manifest:
        man = json.loads(Path(args.manifest).read_text())
        cfg = SystemConfig.from_dict(man["config"])
        cb = resolve_codebooks(cfg, man.get("codebook_path"))
        if cb.checksum() != man["codebook_sha256"]:
            raise ConfigError("codebook checksum differs from the manifest", "codebook")
        codebook = man.get("codebook_path")
        decoders, snrs, trials = man["decoders"], man["snr_db_list"], man["trials"]
        snrs = [math.inf if s == "inf" else float(s) for s in snrs]
    else:
        cfg, cb, codebook = _load(args)
        decoders = [d.strip().lower() for d in args.decoders.split(",") if d.strip()]
        bad = [d for d in decoders if d not in DECODER_NAMES]
        if bad:
            raise ConfigError(f"unknown decoder(s) {bad}", "--decoders")
        snrs = parse_snr(args.snr) if args.snr else list(cfg.snr_db_list)
        if args.noiseless:
            snrs = [math.inf]
        trials = args.trials
    for d in decoders:
        make_decoder(d, cfg).fit(cfg, cb)       # surfaces guard errors before any work
    workers = args.workers if args.workers is not None else default_workers()
    result = run_sweep(cfg, cb, decoders, trials, snrs, workers=workers)
    csv_text = result.to_csv()
    man = manifest(cfg, cb, codebook, {
        "decoders": decoders, "trials": trials,
        "snr_db_list": ["inf" if s == math.inf else s for s in snrs]})
    report = {"manifest": man, **result.to_report()}
    if args.out:
        out = Path(args.out)
        _write(out, csv_text)
        _write(out.with_suffix(".json"), json.dumps(report, indent=1))
        _write(out.with_suffix(".manifest.json"), json.dumps(man, indent=1))
    else:
        sys.stdout.write(csv_text)
    return 0


def measured_counts(cfg, cb, names=DECODER_NAMES, ml_guard=2**30) -> dict:
    """Run each decoder once on a seeded realization and collect its tally."""
    rng = trial_rng(cfg.seed, 0, 0)
    H = draw_channel(rng, cfg)
    q = rng.integers(0, cfg.Q, cfg.U)
    rx = transmit_and_receive(q, H, cb, 10.0, rng)
    out = {}
    for name in names:
        try:
            dec = make_decoder(name, cfg, **({"guard": ml_guard} if name == "ml" else {})).fit(cfg, cb)
        except GuardError:
            out[name] = None
            continue
        res = dec.predict(rx, H)
        out[name] = {**res.ops.as_dict(),
                     **({"ordering_surplus": res.metadata["ordering_surplus"].as_dict()}
                        if "ordering_surplus" in res.metadata else {})}
    return out


def complexity_report(cfg, cb, include_ml=True) -> dict:
    plan = build_tree_levels(cfg.sets, range(cfg.R))
    u_seq = plan.u_sequence
    formulas = {
        "mpa": formula_mpa(cfg).as_dict(),
        "sud": formula_sud(cfg, u_seq).as_dict(),
        "msud": formula_msud(cfg, u_seq).as_dict(),
        "fcsd": formula_fcsd(cfg, u_seq).as_dict(),
        "ml": None,
    }
    names = DECODER_NAMES if include_ml else tuple(n for n in DECODER_NAMES if n != "ml")
    measured = measured_counts(cfg, cb, names)
    rows = {}
    for name in names:
        f, m = formulas[name], measured[name]
        rows[name] = {"formula": f, "measured": m,
                      "match": None if f is None or m is None else
                      (f["adds"] == m["adds"] and f["muls"] == m["muls"])}
    return {"config": {"eta": spectral_efficiency(cfg), "N_t": cfg.N_t, "M": cfg.M, "N_r": cfg.N_r,
                       "K_mpa": cfg.K_mpa, "K_msud": cfg.K_msud,
                       "rho": [v if v != math.inf else "inf" for v in cfg.rho]},
            "u_sequence": list(u_seq), "decoders": rows}


def cmd_complexity(args) -> int:
    cfg, cb, _ = _load(args)
    report = {"tool": "smscma", "version": __version__,
              "conventions": "see smscma.complexity module docstring",
              "config_run": complexity_report(cfg, cb, include_ml=not args.no_ml), "tables": {}}
    for M in (2, 4):
        key = f"eta_{2 + int(math.log2(M))}"
        report["tables"][key] = []
        for N_r in (2, 4, 6, 10):
            c = SystemConfig(N_t=4, M=M, N_r=N_r, K_mpa=5, K_msud=4, rho=(35, 70, 50), seed=cfg.seed)
            report["tables"][key].append(complexity_report(c, resolve_codebooks(c), include_ml=False))
    text = json.dumps(report, indent=1)
    if args.out:
        _write(Path(args.out), text)
    else:
        print(text)
    return 0


def cmd_nom(args) -> int:
    cfg, cb, codebook = _load(args)
    variants = [parse_rho(r) for r in (args.rho or ["15,15,15", "50,15,15", "15,50,15"])]
    for v in variants:
        if len(v) != cfg.R - 1:
            raise ConfigError(f"rho {v} needs {cfg.R - 1} entries", "--rho")
    snrs = parse_snr(args.snr) if args.snr else list(cfg.snr_db_list)
    workers = args.workers if args.workers is not None else default_workers()
    points, _ = run_nom(cfg, cb, variants, args.trials, snrs, workers=workers)
    text = nom_csv(points)
    man = manifest(cfg, cb, codebook, {"rho_variants": [list(map(str, v)) for v in variants],
                                       "trials": args.trials, "snr_db_list": snrs})
    if args.out:
        out = Path(args.out)
        _write(out, text)
        _write(out.with_suffix(".manifest.json"), json.dumps(man, indent=1))
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    cfg, cb, _ = _load(args)
    sets = cb.sets
    ok = True
    print(f"system: U={cfg.U} R={cfg.R} M={cfg.M} N_t={cfg.N_t} N_r={cfg.N_r} "
          f"d_v={cfg.d_v} d_f={cfg.d_f}")
    one = sets.one_based()
    for r, users in enumerate(one["lambda"], 1):
        print(f"Lambda_{r} = {{{', '.join(map(str, users))}}}")
    for u, ores in enumerate(one["omega"], 1):
        print(f"Omega_{u} = {{{', '.join(map(str, ores))}}}")
    if sets.to_indicator() != cfg.indicator:
        print("FAIL: index sets do not rebuild the indicator matrix")
        ok = False
    plan = build_tree_levels(sets, range(cfg.R))
    print("level plan (new users per level): (" + ", ".join(map(str, plan.u_sequence)) + ")")
    if sum(plan.u_sequence) != cfg.U:
        print("FAIL: level plan does not cover every user exactly once")
        ok = False
    eta = spectral_efficiency(cfg)
    print(f"spectral efficiency: {eta} bpcu per user, {cfg.U * eta} bpcu total")
    energies = cb.energies()
    if np.abs(energies - 1).max() > 1e-9:
        print(f"FAIL: codeword energies {energies.tolist()}")
        ok = False
    print("codebook checksum:", cb.checksum())
    print("all checks passed" if ok else "validation failed")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smscma", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("config", nargs="?", help="JSON config file (defaults to the 3 bpcu scenario)")
        sp.add_argument("--codebook", help="JSON codebook file (default: shipped codebook for M)")
        if seed:
            sp.add_argument("--seed", type=int)

    s = sub.add_parser("simulate", help="BER sweep over SNR")
    common(s)
    s.add_argument("--decoders", default="mpa,sud,msud,fcsd")
    s.add_argument("--snr", help="start:step:stop in dB, or a comma list")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--out", help="CSV path; report and manifest are written next to it")
    s.add_argument("--workers", type=int)
    s.add_argument("--noiseless", action="store_true")
    s.add_argument("--manifest", help="re-run exactly what a previous manifest describes")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("complexity", help="closed-form and measured operation counts")
    common(c)
    c.add_argument("--out")
    c.add_argument("--no-ml", action="store_true", help="skip the exhaustive ML measurement")
    c.set_defaults(func=cmd_complexity)

    n = sub.add_parser("nom", help="FCSD misses against MPA for survivor-count variants")
    common(n)
    n.add_argument("--rho", action="append", help="comma-separated survivor counts; repeatable")
    n.add_argument("--snr")
    n.add_argument("--trials", type=int, default=1000)
    n.add_argument("--workers", type=int)
    n.add_argument("--out")
    n.set_defaults(func=cmd_nom)

    v = sub.add_parser("validate", help="check a config/codebook pair and print its structure")
    common(v, seed=False)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CodebookError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardError as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

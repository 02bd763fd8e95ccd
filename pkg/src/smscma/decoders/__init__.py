"""The five SM-SCMA detectors and their functional shortcuts."""

from .base import (BaseDecoder, DecodeResult, GuardError, LevelPlan, build_tree_levels,
                   hypothesis_products, ore_energies, ore_energy_order)
from .fcsd import FCSDecoder
from .ml import MLDecoder
from .mpa import MessageTable, MPADecoder
from .sud import MSUDecoder, SUDecoder

DECODERS = {
    "ml": MLDecoder,
    "mpa": MPADecoder,
    "sud": SUDecoder,
    "msud": MSUDecoder,
    "fcsd": FCSDecoder,
}


def make_decoder(name: str, cfg, **overrides) -> BaseDecoder:
    """Unfitted decoder with hyper-parameters taken from ``cfg``."""
    name = name.lower()
    if name == "mpa":
        params = {"n_iter": cfg.K_mpa}
    elif name == "msud":
        params = {"n_iter": cfg.K_msud}
    elif name == "fcsd":
        params = {"rho": cfg.rho}
    elif name in DECODERS:
        params = {}
    else:
        raise ValueError(f"unknown decoder {name!r}; choose from {sorted(DECODERS)}")
    params.update(overrides)
    return DECODERS[name](**params)


def decode_ml(rx, H, codebooks, cfg, **kw) -> DecodeResult:
    return MLDecoder(**kw).fit(cfg, codebooks).predict(rx, H)


def decode_mpa(rx, H, codebooks, cfg, **kw) -> DecodeResult:
    kw.setdefault("n_iter", cfg.K_mpa)
    return MPADecoder(**kw).fit(cfg, codebooks).predict(rx, H)


def decode_sud(rx, H, codebooks, cfg, **kw) -> DecodeResult:
    return SUDecoder(**kw).fit(cfg, codebooks).predict(rx, H)


def decode_msud(rx, H, codebooks, cfg, **kw) -> DecodeResult:
    kw.setdefault("n_iter", cfg.K_msud)
    return MSUDecoder(**kw).fit(cfg, codebooks).predict(rx, H)


def decode_fcsd(rx, H, codebooks, cfg, **kw) -> DecodeResult:
    kw.setdefault("rho", cfg.rho)
    return FCSDecoder(**kw).fit(cfg, codebooks).predict(rx, H)


__all__ = [
    "BaseDecoder", "DecodeResult", "GuardError", "LevelPlan", "MessageTable",
    "MLDecoder", "MPADecoder", "SUDecoder", "MSUDecoder", "FCSDecoder", "DECODERS",
    "make_decoder", "build_tree_levels", "hypothesis_products", "ore_energies",
    "ore_energy_order", "decode_ml", "decode_mpa", "decode_sud", "decode_msud", "decode_fcsd",
]

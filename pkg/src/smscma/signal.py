"""Bit mapping, Rayleigh channel draws and the noisy superposition at the receiver."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import CodebookSet, SystemConfig


@dataclass(frozen=True)
class UserMessage:
    """Active transmit antenna and codeword of one user, both 0-based."""

    antenna: int
    codeword: int

    def index(self, M: int) -> int:
        """Flat message index ``antenna * M + codeword``."""
        return self.antenna * M + self.codeword

    @classmethod
    def from_index(cls, q: int, M: int) -> "UserMessage":
        return cls(int(q) // M, int(q) % M)

    def one_based(self) -> tuple:
        return (self.antenna + 1, self.codeword + 1)


def _nbits(n: int) -> int:
    return int(math.log2(n))


def map_bits(bits: Sequence[int], cfg: SystemConfig) -> UserMessage:
    """Antenna from the leading log2(N_t) bits, codeword from the rest (MSB first)."""
    bits = [int(b) for b in bits]
    na, nc = _nbits(cfg.N_t), _nbits(cfg.M)
    if len(bits) != na + nc:
        raise ValueError(f"expected {na + nc} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    q = 0
    for b in bits:
        q = (q << 1) | b
    return UserMessage.from_index(q, cfg.M)


def demap_bits(msg: UserMessage, cfg: SystemConfig) -> list:
    if not (0 <= msg.antenna < cfg.N_t and 0 <= msg.codeword < cfg.M):
        raise ValueError(f"message {msg} out of range")
    n = _nbits(cfg.N_t) + _nbits(cfg.M)
    q = msg.index(cfg.M)
    return [(q >> (n - 1 - i)) & 1 for i in range(n)]


def index_bits(q: np.ndarray, eta: int) -> np.ndarray:
    """Vectorised demapping of flat message indices to an (..., eta) bit array."""
    q = np.asarray(q, dtype=np.int64)
    shifts = np.arange(eta - 1, -1, -1)
    return (q[..., None] >> shifts) & 1


@dataclass(frozen=True)
class ChannelRealization:
    """Complex gains ``h[u, r, n_t, n_r]``."""

    h: np.ndarray

    def __post_init__(self):
        if self.h.ndim != 4 or not np.isfinite(self.h).all():
            raise ValueError("channel must be a finite 4-D array (U, R, N_t, N_r)")


@dataclass(frozen=True)
class ReceivedSignal:
    """Received samples ``y[r, n_r]`` and the complex noise variance used."""

    y: np.ndarray
    sigma2: float


def draw_channel(rng: np.random.Generator, cfg: SystemConfig) -> ChannelRealization:
    """i.i.d. CN(0, 1) gains for every (user, ORE, tx antenna, rx antenna)."""
    shape = (cfg.U, cfg.R, cfg.N_t, cfg.N_r)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)
    return ChannelRealization(h)


def noise_variance(snr_db: float) -> float:
    """Complex noise variance for a given SNR; zero for ``snr_db = inf``."""
    if snr_db == math.inf:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def message_indices(messages, M: int) -> np.ndarray:
    return np.array([m.index(M) if isinstance(m, UserMessage) else int(m) for m in messages],
                    dtype=np.int64)


def noiseless_signal(q: np.ndarray, H: ChannelRealization, codebooks: CodebookSet) -> np.ndarray:
    """Sum over users of h[u, r, antenna_u, :] * c_u[r, codeword_u] -> (R, N_r)."""
    M = codebooks.M
    U, R = codebooks.U, codebooks.R
    q = np.asarray(q)
    ant, cw = q // M, q % M
    users = np.arange(U)
    g = H.h[users, :, ant, :]                       # (U, R, N_r)
    c = codebooks.books[users, :, cw]                # (U, R)
    return (g * c[:, :, None]).sum(axis=0)


def transmit_and_receive(messages, H: ChannelRealization, codebooks: CodebookSet,
                         snr_db: float, rng: np.random.Generator | None = None) -> ReceivedSignal:
    """Superimpose every user's active-antenna codeword and add CN(0, sigma2) noise.

    ``snr_db = inf`` gives an exactly noiseless signal and needs no ``rng``.
    """
    U, R, N_t, N_r = H.h.shape
    if (U, R) != (codebooks.U, codebooks.R):
        raise ValueError("channel and codebook dimensions disagree")
    q = message_indices(messages, codebooks.M)
    if q.shape != (U,) or (q < 0).any() or (q >= N_t * codebooks.M).any():
        raise ValueError("message indices out of range")
    y = noiseless_signal(q, H, codebooks)
    sigma2 = noise_variance(snr_db)
    if sigma2 > 0:
        if rng is None:
            raise ValueError("a noisy transmission needs an rng")
        y = y + (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) * math.sqrt(sigma2 / 2)
    return ReceivedSignal(y, sigma2)


def dump_trace(H: ChannelRealization, rx: ReceivedSignal, q) -> dict:
    """Plain-text friendly view of one realization, for debugging."""
    def cplx(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()
    return {"messages": [int(v) + 1 for v in np.asarray(q)], "sigma2": rx.sigma2,
            "y": cplx(rx.y), "h": cplx(H.h)}

"""Static description of an uplink SM-SCMA system.

Holds the dimensions, the ORE/user indicator matrix, the factor-graph index
sets derived from it, and the per-user codebooks. Everything here is
immutable once built and is validated eagerly, so the simulation code can
assume a well-formed system.

Indices are 0-based in memory. File formats and printed diagnostics use
1-based indices.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

PathLike = Union[str, Path]

#: Six users over four OREs, the layout used throughout the experiments.
DEFAULT_INDICATOR = (
    (0, 1, 1, 0, 1, 0),
    (1, 0, 1, 0, 0, 1),
    (0, 1, 0, 1, 0, 1),
    (1, 0, 0, 1, 1, 0),
)

ENERGY_TOL = 1e-9


class ConfigError(ValueError):
    """Raised when a system description violates a structural invariant."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class CodebookError(ConfigError):
    """Raised for malformed or inconsistent codebook input."""


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class IndicatorMatrix:
    """Binary R x U matrix marking which user occupies which ORE.

    The layout must be regular: every column has ``d_v`` ones and every row
    has ``d_f`` ones.
    """

    F: np.ndarray

    def __post_init__(self):
        F = np.array(self.F, dtype=np.int8, copy=True)
        if F.ndim != 2 or F.size == 0:
            raise ConfigError("indicator matrix must be a non-empty 2-D array", "F")
        if not np.isin(F, (0, 1)).all():
            raise ConfigError("entries must be 0 or 1", "F")
        col = F.sum(axis=0)
        row = F.sum(axis=1)
        if (col != col[0]).any() or col[0] == 0:
            raise ConfigError(f"column sums must be uniform and positive, got {col.tolist()}", "F")
        if (row != row[0]).any() or row[0] == 0:
            raise ConfigError(f"row sums must be uniform and positive, got {row.tolist()}", "F")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    @property
    def R(self) -> int:
        return self.F.shape[0]

    @property
    def U(self) -> int:
        return self.F.shape[1]

    @property
    def d_v(self) -> int:
        return int(self.F[:, 0].sum())

    @property
    def d_f(self) -> int:
        return int(self.F[0].sum())

    def __eq__(self, other):
        return isinstance(other, IndicatorMatrix) and np.array_equal(self.F, other.F)

    def __hash__(self):
        return hash(self.F.tobytes())


@dataclass(frozen=True)
class FactorGraphSets:
    """Users per ORE (``lam``) and OREs per user (``omega``), ascending."""

    lam: tuple
    omega: tuple

    @property
    def d_f(self) -> int:
        return len(self.lam[0])

    @property
    def d_v(self) -> int:
        return len(self.omega[0])

    def edges(self):
        """(ORE, position in the ORE, user) triples in ORE-major order."""
        return [(r, p, u) for r, users in enumerate(self.lam) for p, u in enumerate(users)]

    def to_indicator(self) -> IndicatorMatrix:
        F = np.zeros((len(self.lam), len(self.omega)), dtype=np.int8)
        for r, users in enumerate(self.lam):
            F[r, list(users)] = 1
        return IndicatorMatrix(F)

    def one_based(self) -> dict:
        return {
            "lambda": [[u + 1 for u in users] for users in self.lam],
            "omega": [[r + 1 for r in ores] for ores in self.omega],
        }


def derive_factor_graph(F) -> FactorGraphSets:
    """Build the per-ORE and per-user index sets of an indicator matrix.

    Irregular matrices are rejected (``IndicatorMatrix`` validation).
    """
    if not isinstance(F, IndicatorMatrix):
        F = IndicatorMatrix(F)
    lam = tuple(tuple(int(u) for u in np.flatnonzero(row)) for row in F.F)
    omega = tuple(tuple(int(r) for r in np.flatnonzero(col)) for col in F.F.T)
    return FactorGraphSets(lam=lam, omega=omega)


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and run parameters of one SM-SCMA scenario.

    ``rho`` holds one survivor count per tree level except the last.
    ``require_overload`` exists only so degenerate single-user test systems
    can be built; real scenarios keep it on (U > R).
    """

    U: int = 6
    R: int = 4
    M: int = 2
    N_t: int = 4
    N_r: int = 4
    K_mpa: int = 5
    K_msud: int = 4
    rho: tuple = (35, 70, 50)
    snr_db_list: tuple = (0.0, 4.0, 8.0, 12.0, 16.0)
    seed: int = 2020
    F: tuple = DEFAULT_INDICATOR
    require_overload: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(self.rho))
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        object.__setattr__(self, "F", tuple(tuple(int(v) for v in row) for row in self.F))
        for name in ("U", "R", "M", "N_t", "N_r"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"must be a positive integer, got {v!r}", name)
        for name in ("K_mpa", "K_msud"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
                raise ConfigError(f"must be a non-negative integer, got {v!r}", name)
        if self.require_overload and not self.U > self.R:
            raise ConfigError(f"system must be overloaded (U > R), got U={self.U}, R={self.R}", "U")
        if not _is_pow2(self.N_t):
            raise ConfigError(f"must be a power of two, got {self.N_t}", "N_t")
        if not _is_pow2(self.M):
            raise ConfigError(f"must be a power of two, got {self.M}", "M")
        if len(self.rho) != self.R - 1:
            raise ConfigError(f"needs R-1={self.R - 1} entries, got {len(self.rho)}", "rho")
        for v in self.rho:
            if not (v == math.inf or (float(v).is_integer() and v >= 1)):
                raise ConfigError(f"entries must be integers >= 1 or inf, got {v!r}", "rho")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("must fit in 64 bits", "seed")
        ind = self.indicator
        if (ind.R, ind.U) != (self.R, self.U):
            raise ConfigError(f"shape {ind.R}x{ind.U} does not match R x U = {self.R}x{self.U}", "F")

    @property
    def indicator(self) -> IndicatorMatrix:
        return IndicatorMatrix(np.array(self.F))

    @property
    def sets(self) -> FactorGraphSets:
        return derive_factor_graph(self.indicator)

    @property
    def d_f(self) -> int:
        return self.indicator.d_f

    @property
    def d_v(self) -> int:
        return self.indicator.d_v

    @property
    def Q(self) -> int:
        """Messages per user (antenna and codeword pairs)."""
        return self.N_t * self.M

    @property
    def eta(self) -> int:
        return spectral_efficiency(self)

    def replace(self, **changes) -> "SystemConfig":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return SystemConfig(**kw)

    def to_dict(self) -> dict:
        return {
            "U": self.U, "R": self.R, "M": self.M, "N_t": self.N_t, "N_r": self.N_r,
            "K_mpa": self.K_mpa, "K_msud": self.K_msud,
            "rho": [v if v != math.inf else "inf" for v in self.rho],
            "snr_db_list": list(self.snr_db_list),
            "seed": int(self.seed),
            "F": [list(row) for row in self.F],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"codebook"}
        if unknown:
            raise ConfigError(f"unknown field(s) {sorted(unknown)}", sorted(unknown)[0])
        kw = {k: v for k, v in d.items() if k in known}
        if "rho" in kw:
            kw["rho"] = tuple(math.inf if v in ("inf", None) else v for v in kw["rho"])
        return cls(**kw)


def spectral_efficiency(cfg: SystemConfig) -> int:
    """Bits per channel use carried by one user (antenna bits plus codeword bits)."""
    return int(math.log2(cfg.N_t)) + int(math.log2(cfg.M))


def load_config(path: PathLike) -> SystemConfig:
    """Read a JSON config file. Raises ``ConfigError`` with a line hint on parse errors."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}", "<json>") from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "<json>")
    try:
        return SystemConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc), "<json>") from exc


class CodebookSet:
    """Per-user R x M complex codebooks; codeword m of user u is ``books[u][:, m]``.

    Sparsity must follow the indicator matrix and every user's average
    codeword energy is 1.
    """

    def __init__(self, books, F, normalize: bool = False):
        F = F if isinstance(F, IndicatorMatrix) else IndicatorMatrix(F)
        books = np.array(books, dtype=np.complex128, copy=True)
        if books.ndim != 3 or books.shape[:2] != (F.U, F.R):
            raise CodebookError(f"expected shape (U={F.U}, R={F.R}, M), got {books.shape}", "books")
        if not np.isfinite(books).all():
            raise CodebookError("non-finite entries", "books")
        support = books != 0
        for u in range(F.U):
            for r in range(F.R):
                if F.F[r, u] == 0 and support[u, r].any():
                    raise CodebookError(
                        f"user {u + 1} has non-zero entries on ORE {r + 1} where F is 0", "books")
                if F.F[r, u] == 1 and not support[u, r].all():
                    raise CodebookError(
                        f"user {u + 1} has zero entries on its active ORE {r + 1}", "books")
        cw_energy = (np.abs(books) ** 2).sum(axis=1)
        if (cw_energy == 0).any():
            raise CodebookError("zero-energy codeword", "books")
        avg = cw_energy.mean(axis=1)
        if np.any(np.abs(avg - 1.0) > ENERGY_TOL):
            if not normalize:
                raise CodebookError(f"average codeword energy must be 1, got {avg.tolist()}", "books")
            warnings.warn("codebook energies renormalized to unit average per user", stacklevel=2)
            books = books / np.sqrt(avg)[:, None, None]
        books.setflags(write=False)
        self.books = books
        self.F = F
        self.sets = derive_factor_graph(F)

    @property
    def U(self) -> int:
        return self.books.shape[0]

    @property
    def R(self) -> int:
        return self.books.shape[1]

    @property
    def M(self) -> int:
        return self.books.shape[2]

    def energies(self) -> np.ndarray:
        return (np.abs(self.books) ** 2).sum(axis=1).mean(axis=1)

    def to_dict(self) -> dict:
        return {
            "U": self.U, "R": self.R, "M": self.M,
            "F": self.F.F.tolist(),
            "books": [[[[float(z.real), float(z.imag)] for z in row] for row in book]
                      for book in self.books],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def checksum(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def __eq__(self, other):
        return (isinstance(other, CodebookSet) and self.F == other.F
                and np.array_equal(self.books, other.books))

    def __repr__(self):
        return f"CodebookSet(U={self.U}, R={self.R}, M={self.M})"


def codebooks_from_dict(data: dict, F=None) -> CodebookSet:
    for key in ("U", "R", "M", "F", "books"):
        if key not in data:
            raise CodebookError("missing field", key)
    file_F = IndicatorMatrix(data["F"])
    if F is not None:
        F = F if isinstance(F, IndicatorMatrix) else IndicatorMatrix(F)
        if F != file_F:
            raise CodebookError("indicator matrix in file differs from the configured one", "F")
    U, R, M = data["U"], data["R"], data["M"]
    if (file_F.R, file_F.U) != (R, U):
        raise CodebookError(f"F is {file_F.R}x{file_F.U} but header says R={R}, U={U}", "F")
    try:
        arr = np.asarray(data["books"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise CodebookError(f"ragged or non-numeric entries ({exc})", "books") from exc
    if arr.shape != (U, R, M, 2):
        raise CodebookError(f"expected books of shape ({U}, {R}, {M}, 2), got {arr.shape}", "books")
    return CodebookSet(arr[..., 0] + 1j * arr[..., 1], file_F, normalize=True)


def load_codebooks(source: PathLike, F=None) -> CodebookSet:
    """Load a JSON codebook file, checking it against ``F`` when given.

    Energies that are not unit-average are rescaled with a warning.
    """
    text = Path(source).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodebookError(f"line {exc.lineno}: {exc.msg}", "<json>") from exc
    return codebooks_from_dict(data, F)


def save_codebooks(cb: CodebookSet, path: PathLike) -> None:
    Path(path).write_text(cb.dumps())


def make_default_codebooks(M: int, F=DEFAULT_INDICATOR) -> CodebookSet:
    """Unit-energy codebooks from a rotated 4-point base constellation.

    M=4 uses QPSK, M=2 its antipodal pair. The k-th user on an ORE gets an
    extra phase of ``k * (pi/2) / d_f`` so superimposed users stay
    distinguishable; each user's d_v chips carry 1/d_v of the energy.
    """
    if M not in (1, 2, 4):
        raise CodebookError(f"default codebooks exist for M in {{1, 2, 4}}, got {M}", "M")
    F = F if isinstance(F, IndicatorMatrix) else IndicatorMatrix(F)
    sets = derive_factor_graph(F)
    base = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
    points = base[{1: [0], 2: [0, 2], 4: [0, 1, 2, 3]}[M]]
    books = np.zeros((F.U, F.R, M), dtype=np.complex128)
    for r, users in enumerate(sets.lam):
        for k, u in enumerate(users):
            books[u, r] = points * np.exp(1j * k * (np.pi / 2) / sets.d_f) / np.sqrt(F.d_v)
    return CodebookSet(books, F)


def default_codebook_path(M: int) -> Path:
    return Path(str(resources.files("smscma") / "data" / f"codebook_M{M}.json"))


def default_codebooks(M: int) -> CodebookSet:
    """Shipped codebook file for the six-user, four-ORE layout."""
    path = default_codebook_path(M)
    if not path.exists():
        raise CodebookError(f"no shipped codebook for M={M}", "M")
    return load_codebooks(path)


def resolve_codebooks(cfg: SystemConfig, source: Optional[PathLike] = None) -> CodebookSet:
    if source is not None:
        cb = load_codebooks(source, cfg.indicator)
    elif cfg.indicator == IndicatorMatrix(DEFAULT_INDICATOR) and default_codebook_path(cfg.M).exists():
        cb = default_codebooks(cfg.M)
    else:
        cb = make_default_codebooks(cfg.M, cfg.indicator)
    if cb.M != cfg.M:
        raise CodebookError(f"codebook has M={cb.M}, config says {cfg.M}", "M")
    return cb


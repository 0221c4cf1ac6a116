"""Kernel-based multiplier bootstrap (plain and Studentized).

Each bootstrap draw needs only an n-dimensional Gaussian vector with the
kernel matrix as covariance; the max statistic is accumulated over column
blocks of the score matrix so no r x r object is ever formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import RngSpec
from .errors import InvalidInput, InvalidLevel, MissingScale
from .longrun import KernelSpec, andrews_bandwidth, kernel_eval
from .precision import iter_column_blocks

FACTOR_TOL = 1e-8
DRAW_CHUNK = 256
COLUMN_BLOCK = 8192


@dataclass
class BootstrapConfig:
    rng: RngSpec
    M: int = 3000
    studentized: bool = False
    kernel: KernelSpec = KernelSpec()
    bandwidth: Optional[float] = None

    def __post_init__(self):
        if self.M < 1:
            raise InvalidInput("M must be >= 1")


@dataclass
class BootstrapResult:
    stats: np.ndarray  # sorted ascending
    bandwidth: float
    studentized: bool
    rng: RngSpec
    w_diag: Optional[np.ndarray] = None

    @property
    def M(self) -> int:
        return self.stats.shape[0]


def multiplier_cov(n: int, s_n: float, kernel: KernelSpec) -> np.ndarray:
    """The n x n multiplier covariance A with A[i, j] = K(|i-j|/S_n)."""
    idx = np.arange(n)
    return kernel_eval(kernel, np.abs(idx[:, None] - idx[None, :]) / s_n)


def gaussian_mult_factor(n: int, s_n: float, kernel: KernelSpec) -> np.ndarray:
    """A factor L with L L' = A (Cholesky when possible, else a clipped
    symmetric square root)."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    a = multiplier_cov(n, s_n, kernel)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(a)
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)[None, :]


def _draw_multipliers(factor: np.ndarray, rng: RngSpec, m_start: int,
                      m_stop: int) -> np.ndarray:
    """Multiplier vectors g for draws m_start..m_stop-1, one substream per
    draw so results do not depend on chunking or thread count."""
    n = factor.shape[0]
    z = np.empty((n, m_stop - m_start))
    for m in range(m_start, m_stop):
        z[:, m - m_start] = rng.generator(m).standard_normal(n)
    return factor @ z


def _max_stats(eta, scale: np.ndarray, g: np.ndarray,
               column_block: int, keep_vectors: bool):
    """Max_l |scale_l * (eta' g)_l| per draw; optionally the full vectors."""
    n_draws = g.shape[1]
    best = np.zeros(n_draws)
    vectors = np.empty((scale.shape[0], n_draws)) if keep_vectors else None
    for start, stop, cols in iter_column_blocks(eta, column_block):
        s = scale[start:stop, None] * (cols.T @ g)
        if keep_vectors:
            vectors[start:stop] = s
        np.maximum(best, np.abs(s).max(axis=0), out=best)
    return best, vectors


def kmb_draws(eta, h_diag: np.ndarray, cfg: BootstrapConfig,
              w_diag: Optional[np.ndarray] = None,
              column_block: int = COLUMN_BLOCK) -> BootstrapResult:
    """Run M multiplier-bootstrap draws and return the sorted max statistics.

    Studentized draws additionally scale each coordinate by 1/sqrt(w_diag).
    """
    n, r = eta.shape
    if r < 1:
        raise InvalidInput("need at least one score column")
    if cfg.studentized:
        if w_diag is None:
            raise MissingScale("studentized bootstrap needs w_diag")
        if np.any(w_diag <= 0.0):
            raise MissingScale("studentized bootstrap needs positive w_diag")
    s_n = cfg.bandwidth
    if s_n is None:
        s_n = andrews_bandwidth(eta, cfg.kernel)
    factor = gaussian_mult_factor(n, s_n, cfg.kernel)
    scale = h_diag / math.sqrt(n)
    if cfg.studentized:
        scale = scale / np.sqrt(w_diag)
    stats = np.empty(cfg.M)
    for m_start in range(0, cfg.M, DRAW_CHUNK):
        m_stop = min(m_start + DRAW_CHUNK, cfg.M)
        g = _draw_multipliers(factor, cfg.rng, m_start, m_stop)
        stats[m_start:m_stop], _ = _max_stats(eta, scale, g, column_block, False)
    stats.sort()
    return BootstrapResult(stats=stats, bandwidth=float(s_n),
                           studentized=cfg.studentized, rng=cfg.rng,
                           w_diag=np.asarray(w_diag) if w_diag is not None else None)


def kmb_draw_vectors(eta, h_diag: np.ndarray, cfg: BootstrapConfig,
                     w_diag: Optional[np.ndarray] = None) -> np.ndarray:
    """Full r x M matrix of bootstrap vectors (small-r test hook).

    Column m equals the vector whose max-abs is stats[m] in
    :func:`kmb_draws` before sorting.
    """
    n, r = eta.shape
    scale = h_diag / math.sqrt(n)
    if cfg.studentized:
        if w_diag is None:
            raise MissingScale("studentized bootstrap needs w_diag")
        scale = scale / np.sqrt(w_diag)
    s_n = cfg.bandwidth
    if s_n is None:
        s_n = andrews_bandwidth(eta, cfg.kernel)
    factor = gaussian_mult_factor(n, s_n, cfg.kernel)
    out = np.empty((r, cfg.M))
    for m_start in range(0, cfg.M, DRAW_CHUNK):
        m_stop = min(m_start + DRAW_CHUNK, cfg.M)
        g = _draw_multipliers(factor, cfg.rng, m_start, m_stop)
        _, vectors = _max_stats(eta, scale, g, COLUMN_BLOCK, True)
        out[:, m_start:m_stop] = vectors
    return out


def kmb_draws_dual(eta, h_diag: np.ndarray, w: np.ndarray,
                   cfg: BootstrapConfig,
                   column_block: int = COLUMN_BLOCK):
    """Plain and Studentized statistics from the same multiplier draws.

    Used by the simulation harness, where both variants are evaluated on
    every replicate; sharing the Gaussian draws halves the cost.
    """
    n, r = eta.shape
    if np.any(w <= 0.0):
        raise MissingScale("studentized bootstrap needs positive w_diag")
    s_n = cfg.bandwidth
    if s_n is None:
        s_n = andrews_bandwidth(eta, cfg.kernel)
    factor = gaussian_mult_factor(n, s_n, cfg.kernel)
    scale = h_diag / math.sqrt(n)
    scale_stud = scale / np.sqrt(w)
    plain = np.empty(cfg.M)
    stud = np.empty(cfg.M)
    for m_start in range(0, cfg.M, DRAW_CHUNK):
        m_stop = min(m_start + DRAW_CHUNK, cfg.M)
        g = _draw_multipliers(factor, cfg.rng, m_start, m_stop)
        b_plain = np.zeros(m_stop - m_start)
        b_stud = np.zeros(m_stop - m_start)
        for start, stop, cols in iter_column_blocks(eta, column_block):
            proj = cols.T @ g
            np.maximum(b_plain,
                       np.abs(scale[start:stop, None] * proj).max(axis=0),
                       out=b_plain)
            np.maximum(b_stud,
                       np.abs(scale_stud[start:stop, None] * proj).max(axis=0),
                       out=b_stud)
        plain[m_start:m_stop] = b_plain
        stud[m_start:m_stop] = b_stud
    plain.sort()
    stud.sort()
    res_plain = BootstrapResult(stats=plain, bandwidth=float(s_n),
                                studentized=False, rng=cfg.rng)
    res_stud = BootstrapResult(stats=stud, bandwidth=float(s_n),
                               studentized=True, rng=cfg.rng, w_diag=w)
    return res_plain, res_stud


def quantile(result: BootstrapResult, level: float) -> float:
    """The ceil(M * level)-th order statistic of the bootstrap stats."""
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must be in (0, 1), got {level}")
    m = result.M
    k = math.ceil(m * level)
    return float(result.stats[k - 1])


def confidence_region(omega_s: np.ndarray, q: float, n: int,
                      studentized: bool,
                      w_diag: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-coordinate intervals of the simultaneous confidence box, as an
    (r, 2) array of [lo, hi]."""
    omega_s = np.asarray(omega_s, dtype=np.float64)
    half = q / math.sqrt(n)
    if studentized:
        if w_diag is None:
            raise MissingScale("studentized region needs w_diag")
        half = half * np.sqrt(np.asarray(w_diag))
    else:
        half = np.full(omega_s.shape, half)
    return np.column_stack([omega_s - half, omega_s + half])

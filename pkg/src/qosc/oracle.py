"""Time-domain check of the analytic spectra.

The linearized quadrature equations of the super-radiant laser are integrated
with an explicit Euler-Maruyama step under white input noise, the output is
built from the boundary relation ``out = sqrt(kF) a + a_in`` and its spectra
are estimated with an averaged periodogram. Nothing here reuses the Fourier
domain formulas of :mod:`qosc.superradiant`; only the mean field is shared.

The read-out samples the intracavity field at the midpoint of each step,
``(x_n + x_{n+1}) / 2``. With that choice an empty cavity is an exact all-pass
filter in discrete time, so its output spectrum is the input spectrum at every
frequency rather than only for ``w dt -> 0``.
"""

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from . import _kernels
from .errors import ConfigError, FormatError, ParameterError
from .superradiant import linearized_couplings

STABILITY_LIMIT = 0.05
MIN_BINS = 4
DC_EXCLUDE = 3
CHUNK = 1 << 18

MAGIC = b"QOSC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sId")


@dataclass(frozen=True)
class SimConfig:
    """Integration step, length, seed and Welch settings.

    ``omega_min`` (optional) is the lowest offset of interest; it is checked to
    sit at least ``MIN_BINS`` bins above DC. ``omega_max`` (optional) drops
    periodogram bins above it to save memory.
    """

    dt: float
    duration: float
    seed: int = 0
    segments: int = 64
    window: str = "hann"
    overlap: float = 0.0
    omega_min: float = None
    omega_max: float = None

    def __post_init__(self):
        if not self.dt > 0 or not self.duration > 0:
            raise ConfigError("dt and duration must be positive")
        if self.segments < 1:
            raise ConfigError("segments must be at least 1")
        if not 0 <= self.overlap < 1:
            raise ConfigError("overlap must lie in [0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def nsteps(self):
        return int(round(self.duration / self.dt))

    @property
    def segment_length(self):
        n = self.nsteps
        return int(n // (1 + (self.segments - 1) * (1 - self.overlap)))

    @property
    def resolution(self):
        return 2 * math.pi / (self.segment_length * self.dt)

    def validate(self, params):
        rate = max(params.kappa_F, params.kappa_G, params.s * abs(params.C - 2) * max(params.kappa_F, params.kappa_G))
        if self.dt * rate >= STABILITY_LIMIT:
            raise ConfigError(f"dt * max rate = {self.dt * rate:.3g} must stay below {STABILITY_LIMIT}")
        if self.segment_length < 2:
            raise ConfigError("series too short for the requested number of segments")
        if self.omega_min is not None and self.omega_min < MIN_BINS * self.resolution:
            raise ConfigError(
                f"omega_min = {self.omega_min:g} is below {MIN_BINS} frequency bins ({self.resolution:.3g} each); "
                "lengthen the run or use fewer segments"
            )


@dataclass(frozen=True)
class TimeSeries:
    dt: float
    q: np.ndarray
    p: np.ndarray

    def __len__(self):
        return self.q.size

    def to_binary(self, path):
        """Little-endian dump: 16-byte header (magic, version, dt) then (q, p) float64 pairs."""
        path = Path(path)
        pairs = np.empty((self.q.size, 2), dtype="<f8")
        pairs[:, 0], pairs[:, 1] = self.q, self.p
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, self.dt))
            fh.write(pairs.tobytes())

    @classmethod
    def from_binary(cls, path):
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise FormatError("file shorter than the header")
        magic, version, dt = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported version {version}")
        body = raw[_HEADER.size :]
        if len(body) % 16:
            raise FormatError("payload is not a whole number of (q, p) pairs")
        pairs = np.frombuffer(body, dtype="<f8").reshape(-1, 2)
        return cls(dt, pairs[:, 0].copy(), pairs[:, 1].copy())


@dataclass(frozen=True)
class QuadratureModel:
    """Real linear model ``dx = (M x + B xi) dt``, ``y = Cx + D xi``.

    State ``(q_a, q_b, p_a, p_b)``; inputs ``(q_a_in, q_b_in, p_a_in, p_b_in)``
    with spectral densities ``levels``; outputs ``(q_out, p_out)``.
    """

    M: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    levels: np.ndarray


def quadrature_model(params):
    K, lam = linearized_couplings(params)
    kF, kG = params.kappa_F, params.kappa_G
    M = np.array(
        [
            [-kF / 2, -K, 0, 0],
            [-K, -kG / 2 + lam, 0, 0],
            [0, 0, -kF / 2, K],
            [0, 0, K, -kG / 2 - lam],
        ]
    )
    B = -np.diag([math.sqrt(kF), math.sqrt(kG), math.sqrt(kF), math.sqrt(kG)])
    C = np.array([[math.sqrt(kF), 0, 0, 0], [0, 0, math.sqrt(kF), 0]])
    D = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    a, b = 0.5 + params.nbar_a, 0.5 + params.nbar_b
    levels = np.array(
        [a * math.exp(2 * params.r_a), b * math.exp(2 * params.r_b), a * math.exp(-2 * params.r_a), b * math.exp(-2 * params.r_b)]
    )
    return QuadratureModel(M, B, C, D, levels)


def _check_stable(model, params):
    eig = np.linalg.eigvals(model.M)
    scale = max(params.kappa_F, params.kappa_G)
    if eig.real.max() > 1e-9 * scale:
        raise ConfigError(
            f"linearized dynamics are unstable (eigenvalue {eig.real.max():.3g}); "
            "with spin squeezing this happens for C > 2"
        )


def simulate(params, cfg, normals=None):
    """Integrate the fluctuation equations; returns the output quadratures.

    ``normals`` optionally supplies the standard-normal draws, shape
    ``(nsteps, 4)``; otherwise they come from ``numpy.random.PCG64(cfg.seed)``
    in fixed-size chunks, so a seed reproduces the series exactly.
    """
    cfg.validate(params)
    model = quadrature_model(params)
    _check_stable(model, params)
    dt = cfg.dt
    A = np.eye(4) + model.M * dt
    Bd = model.B * dt
    scale = np.sqrt(model.levels / dt)

    n = cfg.nsteps if normals is None else normals.shape[0]
    if normals is not None and normals.shape[1] != 4:
        raise ParameterError("normals must have shape (nsteps, 4)")
    out = np.empty((n, 2))
    x = np.zeros(4)
    rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
    for start in range(0, n, CHUNK):
        stop = min(start + CHUNK, n)
        z = rng.standard_normal((stop - start, 4)) if normals is None else normals[start:stop]
        y, x = _kernels.linear_sde(A, Bd, model.C, model.D, x, z * scale)
        out[start:stop] = y
    return TimeSeries(dt, out[:, 0].copy(), out[:, 1].copy())


@dataclass(frozen=True)
class SpectrumEstimate:
    grid: np.ndarray
    Sqq_hat: np.ndarray
    Spp_hat: np.ndarray
    stderr_qq: np.ndarray
    stderr_pp: np.ndarray
    segments: int
    seg_qq: np.ndarray = field(repr=False, default=None)
    seg_pp: np.ndarray = field(repr=False, default=None)

    @property
    def stderr(self):
        return self.stderr_pp


def _periodograms(x, dt, nperseg, step, nseg, window, nkeep):
    w = get_window(window, nperseg, fftbins=True)
    norm = dt / np.sum(w**2)
    out = np.empty((nseg, nkeep))
    for k in range(nseg):
        seg = x[k * step : k * step + nperseg]
        seg = (seg - seg.mean()) * w
        out[k] = norm * np.abs(np.fft.rfft(seg)[:nkeep]) ** 2
    return out


def estimate_spectrum(series, cfg):
    """Averaged periodogram of both output quadratures.

    Two-sided symmetrized convention: white noise with per-sample variance
    ``S/dt`` has flat spectrum ``S``.
    """
    n = len(series)
    if n < 2 * cfg.segments:
        raise ConfigError(f"series of {n} samples is too short for {cfg.segments} segments")
    nperseg = int(n // (1 + (cfg.segments - 1) * (1 - cfg.overlap)))
    step = max(1, int(round(nperseg * (1 - cfg.overlap))))
    nseg = min(cfg.segments, 1 + (n - nperseg) // step)
    grid = 2 * math.pi * np.fft.rfftfreq(nperseg, series.dt)
    nkeep = grid.size if cfg.omega_max is None else int(np.searchsorted(grid, cfg.omega_max, side="right"))
    grid = grid[:nkeep]
    seg_qq = _periodograms(series.q, series.dt, nperseg, step, nseg, cfg.window, nkeep)
    seg_pp = _periodograms(series.p, series.dt, nperseg, step, nseg, cfg.window, nkeep)
    root = math.sqrt(nseg)
    return SpectrumEstimate(
        grid=grid,
        Sqq_hat=seg_qq.mean(axis=0),
        Spp_hat=seg_pp.mean(axis=0),
        stderr_qq=seg_qq.std(axis=0, ddof=1) / root,
        stderr_pp=seg_pp.std(axis=0, ddof=1) / root,
        segments=nseg,
        seg_qq=seg_qq,
        seg_pp=seg_pp,
    )


def self_calibration(seed=0, n=1 << 16, segments=32, dt=0.1):
    """Measured/expected level for unit-density white noise (should be ~1)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(n) / math.sqrt(dt)
    est = estimate_spectrum(TimeSeries(dt, x, x), SimConfig(dt=dt, duration=n * dt, segments=segments))
    return float(est.Spp_hat[DC_EXCLUDE + 1 :].mean())


@dataclass(frozen=True)
class ComparisonReport:
    max_rel_dev: float
    band_rel_dev: float
    band_stderr: float
    chi2_per_bin: float
    n_bins: int

    @property
    def band_z(self):
        return self.band_rel_dev / self.band_stderr if self.band_stderr > 0 else math.inf


def compare(analytic, estimate, band, quadrature="pp"):
    """Deviation of an estimate from an analytic spectrum over ``band = (lo, hi)``.

    ``band_rel_dev`` is ``mean(S_hat / S) - 1`` over the band, with a standard
    error computed from per-segment band averages. ``chi2_per_bin`` measures
    each bin against the model's own scatter, ``S / sqrt(segments)`` (a
    periodogram bin is exponentially distributed), which avoids the bias of
    dividing by a noisy sample deviation. Bins within 3 of DC are skipped.
    """
    lo, hi = band
    grid = estimate.grid
    idx = np.nonzero((grid >= lo) & (grid <= hi))[0]
    idx = idx[idx > DC_EXCLUDE]
    if idx.size == 0:
        raise ParameterError("band contains no usable frequency bins")
    if quadrature == "pp":
        S_hat, segs = estimate.Spp_hat, estimate.seg_pp
    elif quadrature == "qq":
        S_hat, segs = estimate.Sqq_hat, estimate.seg_qq
    else:
        raise ParameterError(f"unknown quadrature {quadrature!r}")
    model = np.array([analytic(w) for w in grid[idx]])
    ratio = S_hat[idx] / model
    seg_ratio = (segs[:, idx] / model).mean(axis=1)
    band_err = seg_ratio.std(ddof=1) / math.sqrt(segs.shape[0]) if segs.shape[0] > 1 else math.nan
    chi2 = np.mean((ratio - 1) ** 2) * segs.shape[0]
    return ComparisonReport(
        max_rel_dev=float(np.max(np.abs(ratio - 1))),
        band_rel_dev=float(ratio.mean() - 1),
        band_stderr=float(band_err),
        chi2_per_bin=float(chi2),
        n_bins=int(idx.size),
    )


def log_slope(estimate, band, quadrature="pp"):
    """Least-squares slope of log S against log w over a band."""
    lo, hi = band
    grid = estimate.grid
    idx = np.nonzero((grid >= lo) & (grid <= hi))[0]
    idx = idx[idx > DC_EXCLUDE]
    S = estimate.Spp_hat if quadrature == "pp" else estimate.Sqq_hat
    return float(np.polyfit(np.log(grid[idx]), np.log(S[idx]), 1)[0])

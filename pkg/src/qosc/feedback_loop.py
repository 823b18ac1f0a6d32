"""Abstract feedback oscillator: amplifier + out-coupler + delay line.

Units: photon flux with hbar*Omega_0 = 1, so the output power equals the mean
photon flux. ``omega`` is always the offset from the oscillation frequency.
"""

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PoleError

log = logging.getLogger(__name__)

POLE_EPS = 1e-12
HIGH_Q_ETA = 0.9
NEAR_RESONANCE_LIMIT = 0.1


@dataclass(frozen=True)
class LoopParams:
    """Out-coupler reflectivity, delays, flux and input noise of the loop.

    ``tau_G = 0`` describes a broadband amplifier (``kappa_G`` infinite).
    """

    eta: float
    tau_F: float
    tau_G: float
    flux: float
    nbar_0: float = 0.0
    nbar_G: float = 0.0
    r_0: float = 0.0
    r_G: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ParameterError(f"eta must lie in (0, 1), got {self.eta}")
        if not self.tau_F > 0:
            raise ParameterError("tau_F must be positive")
        if not self.tau_G >= 0:
            raise ParameterError("tau_G must be non-negative")
        if not self.flux > 0:
            raise ParameterError("flux must be positive")
        if self.nbar_0 < 0 or self.nbar_G < 0:
            raise ParameterError("thermal occupations must be non-negative")
        if self.eta <= HIGH_Q_ETA:
            log.warning("eta = %g: outside the high-Q regime (1 - eta << 1) the loop formulas are approximate", self.eta)

    @classmethod
    def from_linewidths(cls, kappa_F, kappa_G, flux, eta=0.99, **noise):
        """Loop with the given linewidths; ``kappa_G = inf`` gives ``tau_G = 0``."""
        if not kappa_F > 0 or not kappa_G > 0:
            raise ParameterError("linewidths must be positive")
        tau_G = 0.0 if math.isinf(kappa_G) else (1.0 - eta) / kappa_G
        return cls(eta=eta, tau_F=(1.0 - eta) / kappa_F, tau_G=tau_G, flux=flux, **noise)

    @property
    def kappa_F(self):
        return (1.0 - self.eta) / self.tau_F

    @property
    def kappa_G(self):
        return math.inf if self.tau_G == 0 else (1.0 - self.eta) / self.tau_G

    @property
    def inverse_linewidth_sum(self):
        """``1/kappa_F + 1/kappa_G``, computed without going through infinity."""
        return (self.tau_F + self.tau_G) / (1.0 - self.eta)

    @property
    def nbar_th(self):
        return 0.5 * (self.nbar_0 + self.nbar_G)

    @property
    def high_q(self):
        return self.eta > HIGH_Q_ETA


@dataclass(frozen=True)
class TransferPair:
    H0: complex
    HG: complex


@dataclass(frozen=True)
class QuadratureSpectra:
    """Symmetrized two-sided spectra of the output quadratures."""

    Sqq: float
    Spp: float
    Sqp: complex = 0j


@dataclass(frozen=True)
class SQLBound:
    exact: float
    approx: float


def model_gain(eta, a, tau_G, omega):
    """Saturated peaked gain near resonance: ``(1/sqrt(eta) - a w^2) exp(i tau_G w)``."""
    omega = np.asarray(omega, dtype=float)
    return (1.0 / np.sqrt(eta) - a * omega**2) * np.exp(1j * tau_G * omega)


def solve_loop_exact(G, eta, tau_F, Omega, *, loop_phase_offset=math.pi / 2, normalized=True):
    """Transfer functions obtained by eliminating the internal loop fields.

    Parameters
    ----------
    G : complex
        Amplifier gain at ``Omega``.
    eta, tau_F : float
        Out-coupler reflectivity and feedback delay.
    Omega : float
        Frequency, measured so that ``Omega * tau_F`` is the delay phase beyond
        ``loop_phase_offset``.
    loop_phase_offset : float
        Extra round-trip phase. The default pi/2 closes the loop (``D = 0``) at
        ``Omega = 0`` for a real positive gain of ``1/sqrt(eta)``.
    normalized : bool
        Express ``HG`` against a unit-normalized amplifier noise mode, i.e.
        scale by ``sqrt(| |G|^2 - 1 |)``, the added noise a phase-insensitive
        amplifier of gain ``G`` must carry. With ``False`` the raw coefficient
        of the loop's ``a_G`` is returned.

    Raises
    ------
    PoleError
        If ``|1 + i sqrt(eta) G e^{i(Omega tau_F + offset)}| < 1e-12``.
    """
    if not 0.0 < eta < 1.0:
        raise ParameterError(f"eta must lie in (0, 1), got {eta}")
    G = complex(G)
    delay = np.exp(1j * (Omega * tau_F + loop_phase_offset))
    D = 1.0 + 1j * math.sqrt(eta) * G * delay
    if abs(D) < POLE_EPS:
        raise PoleError(f"loop denominator |D| = {abs(D):.3g} (oscillation condition met)")
    k = math.sqrt(1.0 - eta)
    HG = k / D
    if normalized:
        HG *= math.sqrt(abs(abs(G) ** 2 - 1.0))
    H0 = 1j * math.sqrt(eta) + (1.0 - eta) * G * delay / D
    return TransferPair(complex(H0), complex(HG))


def loop_denominator(G, eta, tau_F, Omega, loop_phase_offset=math.pi / 2):
    return 1.0 + 1j * np.sqrt(eta) * G * np.exp(1j * (Omega * tau_F + loop_phase_offset))


def near_resonance_transfer(params, omega):
    """``H0 = HG = (sqrt(eta) - 1/sqrt(eta)) / (i w (tau_G + tau_F))``."""
    if omega == 0:
        raise PoleError("transfer functions diverge at omega = 0")
    tau = params.tau_F + params.tau_G
    if abs(omega) * tau > NEAR_RESONANCE_LIMIT:
        log.warning("|omega|(tau_F + tau_G) = %.3g: outside the near-resonance regime", abs(omega) * tau)
    root = math.sqrt(params.eta)
    H = (root - 1.0 / root) / (1j * omega * tau)
    return TransferPair(H, H)


def _input_spectra(nbar, r):
    # phase-squeezed input: p squeezed by e^{-2r}, q anti-squeezed
    base = 0.5 + nbar
    return base * math.exp(2 * r), base * math.exp(-2 * r)


def output_spectra(params, omega):
    """Output quadrature spectra for uncorrelated, possibly squeezed, inputs."""
    T = near_resonance_transfer(params, omega)
    q0, p0 = _input_spectra(params.nbar_0, params.r_0)
    qG, pG = _input_spectra(params.nbar_G, params.r_G)
    a0, aG = abs(T.H0) ** 2, abs(T.HG) ** 2
    return QuadratureSpectra(Sqq=a0 * q0 + aG * qG, Spp=a0 * p0 + aG * pG, Sqp=0j)


def gst_phase_spectrum(kappa_F, kappa_G, omega, nbar_th=0.0):
    """Phase spectrum at the generalized Schawlow-Townes level, in linewidth form."""
    inv = 1.0 / kappa_F + 1.0 / kappa_G
    omega = np.asarray(omega, dtype=float)
    return (1.0 + 2.0 * nbar_th) / (inv * omega) ** 2


def gst_linewidth(params):
    """Generalized Schawlow-Townes linewidth ``(1 + 2 n_th) / (2 P (1/kF + 1/kG)^2)``."""
    return (1.0 + 2.0 * params.nbar_th) / (2.0 * params.flux * params.inverse_linewidth_sum**2)


def schawlow_townes_linewidth(kappa_F, flux, nbar_th=0.0):
    """Good-cavity limit ``kappa_F^2 (1 + 2 n_th) / (2 P)``."""
    if not flux > 0:
        raise ParameterError("flux must be positive")
    return kappa_F**2 * (1.0 + 2.0 * nbar_th) / (2.0 * flux)


def sql_product(params, omega):
    """Lower bound on ``Sqq * Spp``: exact ``(|H0|^2 + |HG|^2)^2 / 4`` and its high-Q form."""
    T = near_resonance_transfer(params, omega)
    exact = 0.25 * (abs(T.H0) ** 2 + abs(T.HG) ** 2) ** 2
    approx = (omega * params.inverse_linewidth_sum) ** -4
    return SQLBound(exact=float(exact), approx=float(approx))


def squeezed_linewidth(params):
    """Linewidth with phase-squeezed vacuum inputs, ``Gamma_GST (e^{-2 r0} + e^{-2 rG}) / 2``."""
    if params.nbar_0 or params.nbar_G:
        warnings.warn("squeezed_linewidth assumes vacuum-level inputs; thermal occupations are ignored", stacklevel=2)
    vacuum = LoopParams(params.eta, params.tau_F, params.tau_G, params.flux)
    return gst_linewidth(vacuum) * 0.5 * (math.exp(-2 * params.r_0) + math.exp(-2 * params.r_G))

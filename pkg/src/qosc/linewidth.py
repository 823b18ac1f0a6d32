"""Linewidths from phase-quadrature spectra.

Three routes:

* ``flat_linewidth``: ``Gamma = w^2 Spp(w) / (2 P)``, valid when the frequency
  noise is white (``Spp ~ w^-2``).
* ``beta_line_linewidth``: the beta-separation-line estimate
  ``Gamma = sqrt(8 ln2 A)`` with ``A`` the frequency-noise area below the
  crossing ``Omega_cut`` of ``Spp`` with ``16 ln2 P / (pi Omega)``.
* ``ss_closed_form_linewidth``: the arctan formula for a weakly spin-squeezed
  super-radiant laser.

The first two disagree by a constant factor on a pure ``S0/w^2`` spectrum
(``S0/(2P)`` against ``S0/(4 pi P)``) because the beta-line integral is written
in cycles. The beta-line result is multiplied by that ratio, 2 pi, so that both
routes agree on white frequency noise; ``A`` is reported in the same
calibrated units and the factor is stored in ``calibration``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import superradiant
from .errors import MethodMismatchError, NoCutoffError, NotLasingError, NumericalError, ParameterError

LN2 = math.log(2.0)
FLATNESS_TOL = 0.05
BRACKET_EXPANSIONS = 10
SCAN_POINTS = 400
QUAD_EPSREL = 1e-8
QUAD_ABS_FACTOR = 1e-10
ROOT_XTOL = 1e-14
ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class LinewidthResult:
    gamma: float
    omega_cut: float = math.nan
    A: float = math.nan
    method: str = "flat"
    calibration: float = 1.0
    reduction_scale: float = math.nan
    meta: dict = field(default_factory=dict)

    def to_record(self):
        return {
            "gamma": self.gamma,
            "omega_cut": self.omega_cut,
            "A": self.A,
            "method": self.method,
            "calibration": self.calibration,
        }


def beta_line_calibration():
    """Ratio of the flat-noise linewidth to the raw beta-line linewidth on ``S0/w^2``.

    Flat route: ``S0/(2P)``. Beta-line route: ``Omega_cut = pi S0/(16 ln2 P)``,
    ``A = S0 Omega_cut / (8 pi^3 P)``, ``Gamma = sqrt(8 ln2 A) = S0/(4 pi P)``.
    """
    S0 = P = 1.0
    omega_cut = math.pi * S0 / (16 * LN2 * P)
    A = S0 * omega_cut / (8 * math.pi**3 * P)
    return (S0 / (2 * P)) / math.sqrt(8 * LN2 * A)


CALIBRATION = beta_line_calibration()


def flat_linewidth(spp, omega, flux, tol=FLATNESS_TOL):
    """``Gamma = w^2 Spp(w) / (2 P)`` after checking ``Spp(w)/Spp(2w) = 4``."""
    if not flux > 0:
        raise ParameterError("flux must be positive")
    if omega == 0:
        raise ParameterError("omega must be non-zero")
    s1, s2 = spp(omega), spp(2 * omega)
    ratio = s1 / s2
    if abs(ratio / 4.0 - 1.0) > tol:
        raise MethodMismatchError(
            f"Spp(w)/Spp(2w) = {ratio:.4g}, not 4: frequency noise is not flat; use beta_line_linewidth"
        )
    return LinewidthResult(gamma=omega**2 * s1 / (2 * flux), method="flat")


def beta_line_cutoff(spp, flux, bracket, *, xtol=ROOT_XTOL, rtol=ROOT_RTOL, scan_points=SCAN_POINTS):
    """Largest ``Omega`` where ``16 ln2 P / (pi Omega) = Spp(Omega)``.

    ``bracket`` is scanned on a log grid from the top down; if no sign change
    is found it is widened tenfold on each side, up to 10 times.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ParameterError("bracket must satisfy 0 < lo < hi")

    def f(w):
        return math.log(16 * LN2 * flux / (math.pi * w)) - math.log(spp(w))

    for _ in range(BRACKET_EXPANSIONS + 1):
        grid = np.geomspace(lo, hi, scan_points)
        vals = np.array([f(w) for w in grid])
        if not np.all(np.isfinite(vals)):
            raise NumericalError("spectrum is not finite and positive on the bracket")
        sign = np.sign(vals)
        flips = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
        if flips.size:
            k = flips[-1]
            if vals[k + 1] == 0:
                return float(grid[k + 1]), int(flips.size)
            root = brentq(f, grid[k], grid[k + 1], xtol=xtol * grid[k], rtol=rtol)
            return float(root), int(flips.size)
        lo, hi = lo / 10, hi * 10
    raise NoCutoffError("spectrum never crosses the beta-separation line")


def beta_line_linewidth(
    spp,
    flux,
    bracket=(1e-9, 1e9),
    *,
    cutoff_spp=None,
    epsrel=QUAD_EPSREL,
    xtol=ROOT_XTOL,
    rtol=ROOT_RTOL,
    calibrate=True,
):
    """Beta-separation-line linewidth of a phase spectrum.

    Parameters
    ----------
    spp : callable
        Phase-quadrature spectrum ``Spp(w)``; must be finite for ``w > 0`` and
        side-effect free.
    flux : float
        Mean output photon flux.
    bracket : (float, float)
        Initial search interval for ``Omega_cut``.
    cutoff_spp : callable, optional
        Spectrum used for the cutoff condition only (defaults to ``spp``).
        Passing the unsqueezed spectrum reproduces the weak-squeezing
        approximation behind the closed form.
    calibrate : bool
        Apply the 2 pi convention factor (see module docstring).

    Returns
    -------
    LinewidthResult
    """
    if not flux > 0:
        raise ParameterError("flux must be positive")
    omega_cut, crossings = beta_line_cutoff(cutoff_spp or spp, flux, bracket, xtol=xtol, rtol=rtol)

    def integrand(w):
        return w**2 * spp(w) / (4 * math.pi**2 * flux) / (2 * math.pi)

    probe = np.linspace(omega_cut / 256, omega_cut, 256)
    estimate = abs(np.trapezoid([integrand(w) for w in probe], probe))
    res = quad(
        integrand,
        0.0,
        omega_cut,
        epsabs=QUAD_ABS_FACTOR * max(estimate, 1e-300),
        epsrel=epsrel,
        limit=500,
        full_output=1,
    )
    A_raw, err = res[0], res[1]
    if len(res) > 3 or not math.isfinite(A_raw):
        msg = res[3] if len(res) > 3 else "non-finite result"
        raise NumericalError(f"A-integral did not converge: {msg}")
    c = CALIBRATION if calibrate else 1.0
    A = c**2 * A_raw
    return LinewidthResult(
        gamma=math.sqrt(8 * LN2 * A),
        omega_cut=omega_cut,
        A=A,
        method="beta-line",
        calibration=c,
        meta={"A_raw": A_raw, "crossings": crossings, "quad_error": err},
    )


def _lasing_gst(params, flux):
    if not superradiant.ss_steady_state(params).above_threshold:
        raise NotLasingError("closed-form linewidth needs the laser above threshold")
    if flux is None:
        flux = superradiant.ss_steady_state(params).flux_out
    if not flux > 0:
        raise ParameterError("flux must be positive")
    gst = (1 + 2 * params.nbar_th) / (2 * flux * params.inverse_linewidth_sum**2)
    return gst, flux


def reduction_scale(params):
    """``gamma = 4 ln2 (C-2)^2 kF kG / (pi^2 (kF + kG))``."""
    kF, kG = params.kappa_F, params.kappa_G
    return 4 * LN2 * (params.C - 2) ** 2 * kF * kG / (math.pi**2 * (kF + kG))


def _one_minus_atan_ratio(x):
    """``1 - atan(x)/x``, with the series near 0 where the difference cancels."""
    if abs(x) < 1e-3:
        x2 = x * x
        return x2 / 3 - x2 * x2 / 5 + x2**3 / 7
    return 1 - math.atan(x) / x


def _arctan_form(gst, scale):
    if scale == 0:
        return gst
    return gst * math.sqrt(_one_minus_atan_ratio(gst / scale))


def direct_linewidth(gst, gamma, s):
    """``sqrt(G^2 - gamma G s^2 atan(G/(gamma s^2)))`` evaluated as written."""
    scale = gamma * s**2
    if scale == 0:
        return gst
    radicand = gst**2 - scale * gst * math.atan(gst / scale)
    if radicand < 0:
        if radicand < -1e-12 * gst**2:
            raise NumericalError(f"negative radicand {radicand:g}: weak-squeezing approximation broke down")
        radicand = 0.0
    return math.sqrt(radicand)


def ss_closed_form_linewidth(params, flux=None, *, form="printed"):
    """Arctan linewidth of the spin-squeezed super-radiant laser.

    ``Gamma = sqrt(G^2 - gamma G s^2 atan(G / (gamma s^2)))`` with ``G`` the
    generalized Schawlow-Townes linewidth at ``flux`` (the mean-field output
    flux if omitted).

    ``form="consistent"`` swaps ``gamma s^2`` for ``gamma' s`` with
    ``gamma' = 8 ln2 |C-2| kF kG / (pi (kF + kG))``: the scale that the same
    derivation gives when the corner of the phase spectrum,
    ``s |C-2| kF kG / (kF + kG)``, is carried through without squaring. It
    matches the numerical beta-line integral with the unsqueezed cutoff.
    """
    gst, flux = _lasing_gst(params, flux)
    s = params.s
    if form == "printed":
        gamma = reduction_scale(params)
        scale = gamma * s**2
    elif form == "consistent":
        kF, kG = params.kappa_F, params.kappa_G
        gamma = 8 * LN2 * abs(params.C - 2) * kF * kG / (math.pi * (kF + kG))
        scale = gamma * s
    else:
        raise ParameterError(f"unknown form {form!r}")
    return LinewidthResult(
        gamma=_arctan_form(gst, scale),
        method="closed-form",
        reduction_scale=gamma,
        meta={"gamma_gst": gst, "flux": flux, "form": form},
    )


def factored_linewidth(gst, gamma, s):
    """``G [1 - (G/(gamma s^2))^-1 atan(G/(gamma s^2))]^(1/2)``, the factored arctan form."""
    return _arctan_form(gst, gamma * s**2)


def ss_beta_line_linewidth(params, flux=None, *, method="approx", cutoff="unsqueezed", **kw):
    """Numeric beta-line linewidth of the spin-squeezed laser.

    ``cutoff="unsqueezed"`` takes ``Omega_cut`` from the ``s = 0`` spectrum
    (the weak-squeezing approximation); ``cutoff="self"`` solves the cutoff
    condition on the squeezed spectrum itself.
    """
    gst, flux = _lasing_gst(params, flux)
    spp = superradiant.ss_phase_spectrum(params, method=method)
    if cutoff == "unsqueezed":
        # s = 0 level of the leading-order phase spectrum
        inv = params.inverse_linewidth_sum
        level = (0.5 + params.nbar_a) * math.exp(-2 * params.r_a) + (0.5 + params.nbar_b) * math.exp(-2 * params.r_b)

        def cutoff_spp(w):
            return level / (inv * w) ** 2

    elif cutoff == "self":
        cutoff_spp = None
    else:
        raise ParameterError(f"unknown cutoff {cutoff!r}")
    bracket = kw.pop("bracket", (gst * 1e-3, 1e3 * max(params.kappa_F, params.kappa_G)))
    return beta_line_linewidth(spp, flux, bracket, cutoff_spp=cutoff_spp, **kw)

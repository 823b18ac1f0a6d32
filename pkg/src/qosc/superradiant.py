"""Super-radiant laser in the linearized Holstein-Primakoff picture.

The collective atomic excitation is a bosonic mode ``b`` coupled to the cavity
mode ``a``. Spin squeezing enters through the dimensionless strength
``s = kappa_F chi / (2 g^2)``; every function accepts ``s = 0`` and then
reduces to the plain laser.

Transfer functions come in three flavours:

* leading-order closed forms (``fluctuation_transfer``,
  ``ss_fluctuation_transfer_approx``), the ones linewidth formulas are built on;
* the longer printed expressions with first-order terms in ``w``
  (``ss_fluctuation_transfer_exact``);
* a direct linear solve of the Fourier-domain equations of motion in the
  ``(da, da^+, db, db^+)`` basis (``solve_fluctuations``), used as the
  reference for the other two.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotLasingError, ParameterError, PoleError
from .feedback_loop import QuadratureSpectra

log = logging.getLogger(__name__)

HP_WARN = 0.1
POLE_EPS = 1e-12
SMALL_OMEGA = 0.1


@dataclass(frozen=True)
class SuperradiantParams:
    """Atom number, couplings, linewidths, squeezing strength and input noise.

    ``s`` is stored canonically; build from ``chi`` with :meth:`with_chi`.
    """

    N: float
    g: float
    kappa_F: float
    kappa_G: float
    s: float = 0.0
    nbar_a: float = 0.0
    nbar_b: float = 0.0
    r_a: float = 0.0
    r_b: float = 0.0

    def __post_init__(self):
        if not self.N > 0:
            raise ParameterError("N must be positive")
        if not self.g >= 0:
            raise ParameterError("g must be non-negative")
        if not self.kappa_F > 0 or not self.kappa_G > 0:
            raise ParameterError("kappa_F and kappa_G must be positive")
        if not self.s >= 0:
            raise ParameterError("s must be non-negative")
        if self.s > 0 and self.g == 0:
            raise ParameterError("spin squeezing needs g > 0")
        if self.nbar_a < 0 or self.nbar_b < 0:
            raise ParameterError("thermal occupations must be non-negative")

    @classmethod
    def with_chi(cls, N, g, kappa_F, kappa_G, chi, **kw):
        if g <= 0:
            raise ParameterError("g must be positive to define s from chi")
        return cls(N, g, kappa_F, kappa_G, s=kappa_F * chi / (2 * g**2), **kw)

    @classmethod
    def from_cooperativity(cls, C, N, kappa_F, kappa_G, **kw):
        """Choose ``g`` so that ``8 g^2 N / (kappa_F kappa_G) = C``."""
        if C < 0:
            raise ParameterError("C must be non-negative")
        return cls(N, math.sqrt(C * kappa_F * kappa_G / (8 * N)), kappa_F, kappa_G, **kw)

    def replace(self, **changes):
        fields = dict(self.__dict__)
        fields.update(changes)
        return SuperradiantParams(**fields)

    @property
    def C(self):
        return 8 * self.g**2 * self.N / (self.kappa_F * self.kappa_G)

    @property
    def chi(self):
        return 2 * self.g**2 * self.s / self.kappa_F

    @property
    def threshold(self):
        return 1.0 / (1.0 + self.s)

    @property
    def inverse_linewidth_sum(self):
        return 1.0 / self.kappa_F + 1.0 / self.kappa_G

    @property
    def nbar_th(self):
        return 0.5 * (self.nbar_a + self.nbar_b)


@dataclass(frozen=True)
class MeanField:
    C: float
    s: float
    beta_sq: float
    alpha_sq: float
    flux_out: float
    above_threshold: bool
    hp_validity: float

    @property
    def hp_warning(self):
        return self.hp_validity > HP_WARN

    def to_record(self):
        return {
            "C": self.C,
            "s": self.s,
            "beta_sq": self.beta_sq,
            "alpha_sq": self.alpha_sq,
            "flux_out": self.flux_out,
            "hp_validity": self.hp_validity,
            "above_threshold": self.above_threshold,
        }


@dataclass(frozen=True)
class QuadratureTransfer:
    """Coefficients of ``dq_out = qa dq_a + qb dq_b`` and ``dp_out = pa dp_a + pb dp_b``."""

    qa: complex
    qb: complex
    pa: complex
    pb: complex


def _mean_field(p, C, s):
    above = C > 1.0 / (1.0 + s)
    if above:
        beta_sq = 2 * p.N * (1 + s - 1 / C) / (1 + 2 * s)
        alpha_sq = p.kappa_G * (1 + s * C) / (p.kappa_F * (1 + 2 * s)) * beta_sq
    else:
        beta_sq = alpha_sq = 0.0
    mf = MeanField(
        C=C,
        s=s,
        beta_sq=beta_sq,
        alpha_sq=alpha_sq,
        flux_out=p.kappa_F * alpha_sq,
        above_threshold=bool(above),
        hp_validity=beta_sq / (2 * p.N),
    )
    if mf.hp_warning:
        log.info("|beta|^2/2N = %.3g: Holstein-Primakoff linearization is only qualitative", mf.hp_validity)
    return mf


def steady_state(params):
    """Mean field of the unsqueezed laser: threshold at ``C = 1``."""
    if params.s != 0:
        raise ParameterError("steady_state is the s = 0 model; use ss_steady_state")
    return _mean_field(params, params.C, 0.0)


def ss_steady_state(params):
    """Mean field with spin squeezing: threshold at ``C = 1/(1+s)``."""
    return _mean_field(params, params.C, params.s)


def _require_lasing(params):
    mf = ss_steady_state(params)
    if not mf.above_threshold:
        raise NotLasingError(f"C = {params.C:.4g} is not above threshold {params.threshold:.4g}")
    return mf


def _check_omega(params, omega, need_nonzero=True):
    if need_nonzero and omega == 0:
        raise PoleError("transfer function has a pole at omega = 0")
    kmin = min(params.kappa_F, params.kappa_G)
    if abs(omega) > SMALL_OMEGA * kmin:
        log.debug("|omega| = %.3g is not small against min(kappa) = %.3g", abs(omega), kmin)


def fluctuation_transfer(params, omega):
    """Leading-order coefficients of ``(da_in, db_in^+)`` in ``da_out``.

    Returns ``(c_a, c_b)`` with ``c_a = -i / ((1/kF + 1/kG) w)`` and
    ``c_b = -c_a``. The sign of ``c_b`` is the one the equations of motion
    produce and the quadrature-resolved forms use; it never enters spectra of
    uncorrelated inputs.
    """
    if params.s != 0:
        raise ParameterError("fluctuation_transfer is the s = 0 model; use ss_fluctuation_transfer_*")
    _require_lasing(params)
    _check_omega(params, omega)
    c = -1j / (params.inverse_linewidth_sum * omega)
    return c, -c


def _input_quadrature_spectra(nbar, r):
    base = 0.5 + nbar
    return base * math.exp(2 * r), base * math.exp(-2 * r)


def output_spectra(params, omega, s_ab_q=0.0, s_ab_p=0.0):
    """Output quadrature spectra of the unsqueezed laser.

    ``s_ab_q`` / ``s_ab_p`` are input cross-spectra between the cavity and
    atomic ports; they enter with ``+`` for ``q`` and ``-`` for ``p``.
    """
    if params.s != 0:
        raise ParameterError("output_spectra is the s = 0 model; use ss_output_spectra")
    _require_lasing(params)
    _check_omega(params, omega)
    qa, pa = _input_quadrature_spectra(params.nbar_a, params.r_a)
    qb, pb = _input_quadrature_spectra(params.nbar_b, params.r_b)
    den = (params.inverse_linewidth_sum * omega) ** 2
    return QuadratureSpectra(Sqq=(qa + 2 * s_ab_q + qb) / den, Spp=(pa - 2 * s_ab_p + pb) / den, Sqp=0j)


def linewidth(params):
    """Linewidth of the unsqueezed laser at its own output flux."""
    if params.s != 0:
        raise ParameterError("linewidth is the s = 0 model")
    mf = _require_lasing(params)
    return (1 + 2 * params.nbar_th) / (2 * mf.flux_out * params.inverse_linewidth_sum**2)


def linearized_couplings(params):
    """``(K, lam)``: cavity-atom coupling ``g sqrt(2N - |beta|^2)`` and the squeezing term on ``db``."""
    mf = ss_steady_state(params)
    K = params.g * math.sqrt(2 * params.N - mf.beta_sq)
    lam = 2 * params.chi * (params.N - mf.beta_sq)
    return K, lam


def ss_fluctuation_transfer_exact(params, omega):
    """Quadrature transfer functions with their first-order terms in ``w``, as printed.

    These keep the published expressions verbatim, including the numerator of
    the ``dp_a`` coefficient, ``(1+2s) kF kG + i w (1 + (4 - C) s kG)``.
    :func:`solve_fluctuations` gives the unabridged solution.
    """
    _require_lasing(params)
    s, C, kF, kG = params.s, params.C, params.kappa_F, params.kappa_G
    w = omega
    if w == 0 and s == 0:
        raise PoleError("pole at omega = 0 without spin squeezing")
    qden = (kF * (1 + 2 * s) + kG * (1 + C * s)) * w
    if w == 0:
        qa = qb = complex(math.inf)
    else:
        qa = -1j * kF * kG * (1 + C * s) / qden
        qb = 1j * kF * kG * (1 + 2 * s) * math.sqrt((1 + 2 * s) * (1 + C * s)) / qden
    pden = 1j * w * (kF + kG) + s * ((C - 2) * kF * kG + 2j * kF * w - 1j * (C - 4) * kG * w)
    if abs(pden) < POLE_EPS * kF * kG:
        raise PoleError("phase-quadrature denominator vanishes")
    pa = ((1 + 2 * s) * kF * kG + 1j * w * (1 + (4 - C) * s * kG)) / pden
    pb = (1 + 2 * s) * math.sqrt((1 + C * s) / (1 + 2 * s)) * kF * kG / pden
    return QuadratureTransfer(complex(qa), complex(qb), complex(pa), complex(pb))


def ss_fluctuation_transfer_approx(params, omega):
    """Small-``s``, small-``w`` quadrature transfer functions."""
    _require_lasing(params)
    s, C, kF, kG = params.s, params.C, params.kappa_F, params.kappa_G
    if omega == 0 and s == 0:
        raise PoleError("pole at omega = 0 without spin squeezing")
    if omega == 0:
        qa = complex(math.inf)
    else:
        qa = -1j * kF * kG / ((kF + kG) * omega)
    pden = s * (C - 2) * kF * kG + 1j * omega * (kF + kG)
    if abs(pden) < POLE_EPS * kF * kG:
        raise PoleError("phase-quadrature denominator vanishes")
    pa = kF * kG / pden
    return QuadratureTransfer(complex(qa), complex(-qa), complex(pa), complex(pa))


def corner_frequency(params):
    """Offset where the squeezing and ``i w`` terms of the phase denominator match."""
    return params.s * abs(params.C - 2) * params.kappa_F * params.kappa_G / (params.kappa_F + params.kappa_G)


def drift_matrix(params):
    """Drift of ``(da, da^+, db, db^+)`` from the linearized equations of motion."""
    K, lam = linearized_couplings(params)
    kF, kG = params.kappa_F, params.kappa_G
    M = np.zeros((4, 4), dtype=complex)
    # d da/dt = -kF/2 da - K db^+
    M[0, 0], M[0, 3] = -kF / 2, -K
    # d da^+/dt = -kF/2 da^+ - K db
    M[1, 1], M[1, 2] = -kF / 2, -K
    # d db/dt = -kG/2 db - K da^+ + lam db^+
    M[2, 2], M[2, 1], M[2, 3] = -kG / 2, -K, lam
    # d db^+/dt = -kG/2 db^+ - K da + lam db
    M[3, 3], M[3, 0], M[3, 2] = -kG / 2, -K, lam
    return M


def solve_fluctuations(params, omega):
    """Quadrature transfer functions from a direct solve of the Fourier-domain equations.

    Inputs ``u = (a_in, a_in^+, b_in, b_in^+)`` enter with ``-sqrt(kappa)``;
    the output is ``da_out = sqrt(kF) da + a_in``. Fourier convention
    ``x(t) = int x[w] e^{-i w t}``.
    """
    M = drift_matrix(params)
    kF, kG = params.kappa_F, params.kappa_G
    B = -np.diag([math.sqrt(kF), math.sqrt(kF), math.sqrt(kG), math.sqrt(kG)]).astype(complex)
    lhs = -1j * omega * np.eye(4) - M
    if abs(np.linalg.det(lhs)) < POLE_EPS * (kF * kG) ** 2:
        raise PoleError(f"fluctuation equations are singular at omega = {omega}")
    X = np.linalg.solve(lhs, B)
    # output field and its conjugate in terms of u
    out = math.sqrt(kF) * X[:2] + np.eye(4)[:2]
    # quadratures: q = (a + a^+)/sqrt2, p = i(a^+ - a)/sqrt2; a = (q + i p)/sqrt2
    R_out = np.array([[1, 1], [-1j, 1j]]) / math.sqrt(2)
    T_in = np.zeros((4, 4), dtype=complex)
    T_in[0, 0], T_in[0, 1] = 1, 1j  # a_in
    T_in[1, 0], T_in[1, 1] = 1, -1j  # a_in^+
    T_in[2, 2], T_in[2, 3] = 1, 1j  # b_in
    T_in[3, 2], T_in[3, 3] = 1, -1j  # b_in^+
    T_in /= math.sqrt(2)
    Q = R_out @ out @ T_in  # rows (q_out, p_out), cols (q_a, p_a, q_b, p_b)
    return QuadratureTransfer(Q[0, 0], Q[0, 2], Q[1, 1], Q[1, 3]), Q


def ss_output_spectra(params, omega, method="approx"):
    """Output quadrature spectra with spin squeezing.

    ``method`` picks the transfer functions: ``"approx"`` (default; reduces to
    :func:`output_spectra` at ``s = 0`` exactly), ``"exact"`` (printed
    first-order forms) or ``"solve"`` (direct linear solve).
    """
    if method == "approx":
        T = ss_fluctuation_transfer_approx(params, omega)
    elif method == "exact":
        T = ss_fluctuation_transfer_exact(params, omega)
    elif method == "solve":
        _require_lasing(params)
        T, _ = solve_fluctuations(params, omega)
    else:
        raise ParameterError(f"unknown method {method!r}")
    qa, pa = _input_quadrature_spectra(params.nbar_a, params.r_a)
    qb, pb = _input_quadrature_spectra(params.nbar_b, params.r_b)
    Sqq = abs(T.qa) ** 2 * qa + abs(T.qb) ** 2 * qb
    Spp = abs(T.pa) ** 2 * pa + abs(T.pb) ** 2 * pb
    return QuadratureSpectra(Sqq=float(Sqq), Spp=float(Spp), Sqp=0j)


def ss_phase_spectrum(params, method="approx"):
    """``Spp`` as a function of ``omega`` (for the linewidth estimators)."""

    def spp(omega):
        return ss_output_spectra(params, omega, method=method).Spp

    return spp

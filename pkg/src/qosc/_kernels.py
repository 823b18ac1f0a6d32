"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports and ``QOSC_DISABLE_NUMBA`` is unset
(or ``0``). Set ``QOSC_DISABLE_NUMBA=1`` to force the numpy path; tests and the
benchmark switch explicitly with :func:`set_backend`.

Two kernels live here:

``pv_hilbert``
    subtract-the-singularity principal-value sum on a uniform grid, O(n^2).
``linear_sde``
    explicit Euler-Maruyama update of a linear SDE ``x' = A x + B xi`` with a
    trapezoid-sampled read-out ``y_n = C (x_n + x_{n+1}) / 2 + D xi_n``.
"""

import os

import numpy as np
from scipy.signal import lfilter

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get("QOSC_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if (HAVE_NUMBA and not _env_disabled()) else "numpy"


def get_backend():
    return _backend


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


# ----------------------------------------------------------------------------
# principal-value Hilbert sum
# ----------------------------------------------------------------------------


def _pv_hilbert_numpy(grid, values, deriv, chunk=512):
    n = grid.size
    h = grid[1] - grid[0]
    out = np.empty(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        rows = np.arange(start, stop)
        d = grid[None, :] - grid[rows, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (values[None, :] - values[rows, None]) / d
        f[np.arange(stop - start), rows] = deriv[rows]
        out[start:stop] = h * (f.sum(axis=1) - 0.5 * (f[:, 0] + f[:, -1]))
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _pv_hilbert_numba(grid, values, deriv):
        n = grid.size
        h = grid[1] - grid[0]
        out = np.empty(n)
        for i in range(n):
            wi = grid[i]
            vi = values[i]
            acc = 0.0
            for j in range(n):
                if j == i:
                    f = deriv[i]
                else:
                    f = (values[j] - vi) / (grid[j] - wi)
                if j == 0 or j == n - 1:
                    f *= 0.5
                acc += f
            out[i] = h * acc
        return out

else:  # pragma: no cover
    _pv_hilbert_numba = None


def pv_hilbert(grid, values, deriv):
    """Trapezoid sum of ``(v(w') - v(w)) / (w' - w)`` over a uniform grid, for every ``w``.

    The removable singularity at ``w' = w`` is filled with ``deriv``.
    """
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    deriv = np.ascontiguousarray(deriv, dtype=np.float64)
    if _backend == "numba":
        return _pv_hilbert_numba(grid, values, deriv)
    return _pv_hilbert_numpy(grid, values, deriv)


# ----------------------------------------------------------------------------
# linear SDE, Euler-Maruyama
# ----------------------------------------------------------------------------


if HAVE_NUMBA:

    @njit(cache=True)
    def _linear_sde_numba(A, B, C, D, x0, noise):
        nsteps = noise.shape[0]
        nx = A.shape[0]
        nu = B.shape[1]
        ny = C.shape[0]
        out = np.empty((nsteps, ny))
        x = x0.copy()
        xn = np.empty(nx)
        for k in range(nsteps):
            for i in range(nx):
                acc = 0.0
                for j in range(nx):
                    acc += A[i, j] * x[j]
                for j in range(nu):
                    acc += B[i, j] * noise[k, j]
                xn[i] = acc
            for i in range(ny):
                acc = 0.0
                for j in range(nx):
                    acc += C[i, j] * 0.5 * (x[j] + xn[j])
                for j in range(nu):
                    acc += D[i, j] * noise[k, j]
                out[k, i] = acc
            for i in range(nx):
                x[i] = xn[i]
        return out, x

else:  # pragma: no cover
    _linear_sde_numba = None


def _linear_sde_loop(A, B, C, D, x0, noise):
    out = np.empty((noise.shape[0], C.shape[0]))
    x = x0.copy()
    for k in range(noise.shape[0]):
        xn = A @ x + B @ noise[k]
        out[k] = C @ (0.5 * (x + xn)) + D @ noise[k]
        x = xn
    return out, x


def _linear_sde_numpy(A, B, C, D, x0, noise):
    # x_{n+1} = A x_n + u_n decouples into scalar recursions in A's eigenbasis,
    # each of which is a first-order IIR filter.
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) > 1e10:
        return _linear_sde_loop(A, B, C, D, x0, noise)
    Vinv = np.linalg.inv(V)
    w = (noise @ B.T) @ Vinv.T
    y0 = Vinv @ x0
    ynext = np.empty(w.shape, dtype=np.complex128)
    for k in range(lam.size):
        ynext[:, k], _ = lfilter([1.0], [1.0, -lam[k]], w[:, k], zi=[lam[k] * y0[k]])
    xnext = (ynext @ V.T).real
    xprev = np.empty_like(xnext)
    xprev[0] = x0
    xprev[1:] = xnext[:-1]
    out = (0.5 * (xprev + xnext)) @ C.T + noise @ D.T
    return out, xnext[-1].copy()


def linear_sde(A, B, C, D, x0, noise):
    """Run one chunk of the discrete linear SDE; returns ``(outputs, final_state)``.

    ``noise`` has shape ``(nsteps, nu)`` and already carries the per-step scale.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    D = np.ascontiguousarray(D, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    if noise.shape[0] == 0:
        return np.empty((0, C.shape[0])), x0.copy()
    if _backend == "numba":
        return _linear_sde_numba(A, B, C, D, x0, noise)
    return _linear_sde_numpy(A, B, C, D, x0, noise)

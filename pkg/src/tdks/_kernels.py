"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The numba path is used whenever numba imports successfully; set the
environment variable ``TDKS_PURE_NUMPY=1`` to force the numpy fallback
(useful for debugging and for the benchmark in ``benchmarks/``).
Both paths produce bitwise-comparable results at float64 precision.
"""

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("TDKS_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes")

try:
    if _FORCE_NUMPY:
        raise ImportError("numpy fallback forced via TDKS_PURE_NUMPY")
    import warnings

    # the sandboxed TBB is too old for numba's layer; the workqueue fallback is fine
    warnings.filterwarnings("ignore", message=".*TBB.*")
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def pairwise_inverse_distance_numpy(points, softening, diagonal):
    """Dense matrix w[i,j] = 1/sqrt(|x_i－x_j|^2 + softening^2), blocked to limit temporaries.

    The i==j entries are overwritten with ``diagonal`` (a cell-averaged value
    supplied by the caller; the raw value is singular for softening == 0).
    """
    pts = np.asarray(points, dtype=np.float64)
    q = pts.shape[0]
    out = np.empty((q, q), dtype=np.float64)
    s2 = float(softening) ** 2
    block = max(1, int(2e7) // max(q, 1))
    for start in range(0, q, block):
        stop = min(start + block, q)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff) + s2
        if s2 == 0.0:
            idx = np.arange(start, stop)
            d2[idx - start, idx] = 1.0  # placeholder, fixed below
        out[start:stop] = 1.0 / np.sqrt(d2)
    np.fill_diagonal(out, diagonal)
    return out


def density_numpy(psi):
    """Particle-summed |psi|^2 on the grid; psi has shape (nodes, particles)."""
    return np.einsum("qj,qj->q", psi.real, psi.real) + np.einsum(
        "qj,qj->q", psi.imag, psi.imag
    )


def phase_apply_numpy(psi, v, dt):
    """exp(-i*v*dt) applied pointwise to every particle channel of psi."""
    return np.exp(-1j * dt * v)[:, None] * psi


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _pairwise_numba(points, softening, diagonal):
        q = points.shape[0]
        ndim = points.shape[1]
        out = np.empty((q, q), dtype=np.float64)
        s2 = softening * softening
        for i in prange(q):
            for j in range(q):
                if i == j:
                    out[i, j] = diagonal
                else:
                    d2 = s2
                    for d in range(ndim):
                        diff = points[i, d] - points[j, d]
                        d2 += diff * diff
                    out[i, j] = 1.0 / np.sqrt(d2)
        return out

    @njit(cache=True)
    def _density_numba(psi):
        q, n = psi.shape
        out = np.zeros(q, dtype=np.float64)
        for i in range(q):
            acc = 0.0
            for j in range(n):
                z = psi[i, j]
                acc += z.real * z.real + z.imag * z.imag
            out[i] = acc
        return out

    @njit(cache=True)
    def _phase_apply_numba(psi, v, dt):
        q, n = psi.shape
        out = np.empty_like(psi)
        for i in range(q):
            ph = np.exp(-1j * dt * v[i])
            for j in range(n):
                out[i, j] = ph * psi[i, j]
        return out

    def pairwise_inverse_distance(points, softening, diagonal):
        return _pairwise_numba(
            np.ascontiguousarray(points, dtype=np.float64),
            float(softening),
            float(diagonal),
        )

    def density_from_channels(psi):
        return _density_numba(np.ascontiguousarray(psi, dtype=np.complex128))

    def phase_apply(psi, v, dt):
        return _phase_apply_numba(
            np.ascontiguousarray(psi, dtype=np.complex128),
            np.ascontiguousarray(v, dtype=np.float64),
            float(dt),
        )

else:
    pairwise_inverse_distance = pairwise_inverse_distance_numpy
    density_from_channels = density_numpy
    phase_apply = phase_apply_numpy

"""Prony's method, Cadzow denoising and the rank probe for moment sequences."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lstsq, svd, toeplitz


class SpectralError(ValueError):
    """Moment sequence cannot be resolved at the requested order."""


@dataclass
class MomentVector:
    """Moments ``s_p = sum_k b_k u_k**p`` on the ladder ``omega_p = omega0 + step * p``.

    Attributes
    ----------
    values : ndarray
        Complex moments ``s_0 .. s_{N-1}``.
    omega0 : float
        Frequency of ``s_0``.
    step : float
        Ladder spacing (``lambda``).
    """

    values: np.ndarray
    omega0: float
    step: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)

    @property
    def frequencies(self):
        return self.omega0 + self.step * np.arange(len(self.values))

    def __len__(self):
        return len(self.values)


@dataclass
class PronySolution:
    """Output of :func:`prony`."""

    weights: np.ndarray
    roots: np.ndarray
    filter: np.ndarray
    singular_values: np.ndarray
    rank: int
    diagnostics: dict = field(default_factory=dict)


def toeplitz_matrix(s, order):
    """Rows ``[s_m, s_{m-1}, ..., s_{m-order}]`` for ``m = order .. N-1``."""
    s = np.asarray(s)
    return toeplitz(s[order:], s[order::-1])


def numerical_rank(singular_values, tol=1e-10):
    if singular_values[0] == 0:
        return 0
    return int(np.sum(singular_values > tol * singular_values[0]))


def prony(moments, order):
    """Recover ``(b_k, u_k)`` from ``s_m = sum_k b_k u_k**m``.

    Parameters
    ----------
    moments : MomentVector or array_like
        At least ``2 * order`` moments.
    order : int
        Number of terms ``K``.

    Returns
    -------
    PronySolution

    Raises
    ------
    SpectralError
        For an all-zero sequence or too few moments.
    """
    s = np.asarray(getattr(moments, "values", moments), dtype=complex)
    if len(s) < 2 * order:
        raise SpectralError(f"need {2 * order} moments, got {len(s)}")
    scale = np.max(np.abs(s))
    if scale == 0:
        raise SpectralError("zero sequence, order unresolvable")
    S = toeplitz_matrix(s / scale, order)
    _, sv, vh = svd(S)
    h = vh[-1].conj()
    if abs(h[0]) < 1e-14:
        raise SpectralError("annihilating filter has a vanishing leading tap")
    h = h / h[0]
    roots = np.roots(h) if order > 0 else np.zeros(0, complex)
    if not np.all(np.isfinite(roots)):
        raise SpectralError("root finding failed")
    V = np.vander(roots, len(s), increasing=True).T
    weights = lstsq(V, s)[0]
    return PronySolution(weights, roots, h, sv, numerical_rank(sv, 1e-8))


def annihilation_residual(moments, h):
    """``max |sum_l h_l s_{m-l}|`` over valid ``m``."""
    s = np.asarray(getattr(moments, "values", moments), dtype=complex)
    return float(np.max(np.abs(toeplitz_matrix(s, len(h) - 1) @ h)))


def forward_moments(weights, roots, count):
    """``s_m = sum_k b_k u_k**m`` for ``m = 0 .. count-1``."""
    return np.vander(np.asarray(roots), count, increasing=True).T @ np.asarray(weights)


def _average_diagonals(T, n):
    # T[i, j] holds s_{order + i - j}; average each constant diagonal
    rows, cols = T.shape
    order = cols - 1
    out = np.zeros(n, dtype=complex)
    counts = np.zeros(n)
    for i in range(rows):
        for j in range(cols):
            out[order + i - j] += T[i, j]
            counts[order + i - j] += 1
    return out / counts


def cadzow(moments, order, iterations=20, tol=1e-10):
    """Project moments onto sequences whose Toeplitz matrix has rank ``order``.

    Alternates rank-``order`` SVD truncation with diagonal averaging on the
    most nearly square Toeplitz matrix of the sequence. With exactly ``2K``
    moments that matrix is ``K x (K+1)``, already of rank ``K``, so the
    sequence is returned unchanged.
    """
    mv = moments if isinstance(moments, MomentVector) else None
    s = np.asarray(getattr(moments, "values", moments), dtype=complex).copy()
    n = len(s)
    cols = max(order, n // 2)
    for _ in range(iterations):
        T = toeplitz_matrix(s, cols)
        U, sv, Vh = svd(T, full_matrices=False)
        T = (U[:, :order] * sv[:order]) @ Vh[:order]
        new = _average_diagonals(T, n)
        delta = np.linalg.norm(new - s)
        s = new
        if delta < tol * max(1.0, np.linalg.norm(s)):
            break
    if mv is not None:
        return MomentVector(s, mv.omega0, mv.step)
    return s


def rank_probe(moments, order=2, noisy=False):
    """Numerical rank of the Prony matrix ``S`` built for ``order`` terms.

    Rank one is declared when ``sigma_2 / sigma_1`` falls below ``1e-6``
    (or ``1e-2`` when ``noisy``).
    """
    s = np.asarray(getattr(moments, "values", moments), dtype=complex)
    S = toeplitz_matrix(s, order)
    sv = svd(S, compute_uv=False)
    if sv[0] == 0:
        return 0
    threshold = 1e-2 if noisy else 1e-6
    return 1 + int(np.sum(sv[1:] / sv[0] >= threshold))


def unwrap_locations(roots, step, window):
    """Map ``u_k = exp(j step tau_k)`` to ``tau_k`` inside ``window``.

    ``arg(u) / step`` is defined modulo ``2 pi / |step|``; the representative
    closest to the window centre is returned.
    """
    period = 2 * np.pi / abs(step)
    base = np.angle(roots) / step
    centre = 0.5 * (window[0] + window[1])
    return base + period * np.round((centre - base) / period)

"""Local reproduction of exponentials and polynomials from non-uniform kernel shifts."""

import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.linalg import lstsq

PROBES = 200


class ReproductionError(ValueError):
    """The requested reproduction is not available on the interval."""


@dataclass(frozen=True)
class KnotFreeInterval:
    """Open interval ``(lo, hi)`` together with the shifted kernels overlapping it."""

    lo: float
    hi: float
    kernels: tuple = ()

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ReproductionError(f"empty interval ({self.lo:.6g}, {self.hi:.6g})")

    @property
    def width(self):
        return self.hi - self.lo

    def probes(self, count=PROBES):
        return np.linspace(self.lo, self.hi, count + 2)[1:-1]

    def contains(self, t):
        return self.lo < t < self.hi


@dataclass
class ReproductionCoefficients:
    """Weights ``c[m, n]`` with ``sum_n c[m, n] k_n(t) ~ target_m(t)`` on the interval.

    Attributes
    ----------
    coefs : ndarray, shape (M, N)
    exponents : ndarray
        Target exponents (``exp(e_m t)``); empty for polynomial targets.
    degrees : tuple
        Target monomial degrees, when reproducing polynomials.
    interval : KnotFreeInterval
    residual : float
        Sup-norm reproduction error over the probe grid.
    mse : float
        Mean-squared reproduction error over the probe grid.
    """

    coefs: np.ndarray
    exponents: np.ndarray
    degrees: tuple
    interval: KnotFreeInterval
    residual: float = 0.0
    mse: float = 0.0
    warnings: list = field(default_factory=list)

    def moments(self, samples):
        """``s_m = sum_n c[m, n] y_n``."""
        return self.coefs @ np.asarray(samples, dtype=complex)

    def reproduce(self, t):
        """Evaluate ``sum_n c[m, n] k_n(t)`` for each target (rows)."""
        t = np.asarray(t, dtype=float)
        K = np.array([k.evaluate(t) for k in self.interval.kernels])
        return self.coefs @ K


def _targets(t, exponents, degrees):
    rows = [np.exp(np.multiply.outer(exponents, t))] if len(exponents) else []
    rows += [t ** p for p in degrees]
    return np.vstack(rows) if rows else np.zeros((0, len(t)))


def _check_exact(interval, kernel, tol):
    inside = [x for x in kernel.knots if interval.lo + tol < x < interval.hi - tol]
    if inside:
        raise ReproductionError(f"knot at {inside[0]:.12g} lies inside "
                                f"({interval.lo:.12g}, {interval.hi:.12g})")
    piece = kernel.piece_at(0.5 * (interval.lo + interval.hi))
    if piece is not None and not piece.is_exact:
        raise ReproductionError("kernel is tabulated on the interval")
    return piece


def _score(result, exponents, degrees):
    t = result.interval.probes()
    err = result.reproduce(t) - _targets(t, exponents, degrees)
    result.residual = float(np.max(np.abs(err)))
    result.mse = float(np.mean(np.abs(err) ** 2))
    return result


def exact_coefficients(interval, exponents=(), degrees=(), knot_tol=1e-12):
    """Exact reproduction coefficients on a knot-free interval.

    Each shifted kernel restricted to the interval is a combination of
    exponentials and monomials; matching the coefficient of every basis
    function gives a small linear system, solved in the minimum-norm
    least-squares sense when there are more kernels than targets.

    Parameters
    ----------
    interval : KnotFreeInterval
        Interval and the shifted kernels ``k_n`` to combine.
    exponents : sequence of complex
        Reproduce ``exp(e t)`` for each ``e``.
    degrees : sequence of int
        Reproduce ``t**p`` for each ``p``.

    Returns
    -------
    ReproductionCoefficients

    Raises
    ------
    ReproductionError
        If a knot lies inside the interval, a kernel is tabulated there, or
        the system is singular.
    """
    exponents = np.atleast_1d(np.asarray(exponents, dtype=complex))
    degrees = tuple(int(p) for p in degrees)
    centre = 0.5 * (interval.lo + interval.hi)
    pieces = [_check_exact(interval, k, knot_tol) for k in interval.kernels]
    rates, max_deg = list(exponents), max(degrees, default=0)
    for p in pieces:
        if p is None:
            continue
        for r in p.rates:
            if not any(abs(r - q) <= 1e-12 * max(1.0, abs(r)) for q in rates):
                rates.append(r)
        max_deg = max(max_deg, p.poly.size - 1)

    def index(r):
        return next(i for i, q in enumerate(rates) if abs(r - q) <= 1e-12 * max(1.0, abs(r)))

    nb = len(rates) + max_deg + 1
    A = np.zeros((nb, len(pieces)), dtype=complex)
    for n, p in enumerate(pieces):
        if p is None:
            continue
        p = p.rebased(centre)
        for r, a in zip(p.rates, p.coefs):
            A[index(r), n] += a
        A[len(rates):len(rates) + p.poly.size, n] += p.poly
    B = np.zeros((nb, len(exponents) + len(degrees)), dtype=complex)
    for m, e in enumerate(exponents):
        B[index(e), m] = np.exp(e * centre)
    for j, deg in enumerate(degrees):
        for i in range(deg + 1):
            B[len(rates) + i, len(exponents) + j] = comb(deg, i) * centre ** (deg - i)
    coefs, _, rank, _ = lstsq(A, B)
    if rank < min(len(pieces), len(exponents) + len(degrees)):
        raise ReproductionError("degenerate shifts: reproduction system is singular")
    result = ReproductionCoefficients(coefs.T, exponents, degrees, interval)
    return _score(result, exponents, degrees)


def _gauss_grid(interval, kernels, nodes):
    edges = {interval.lo, interval.hi}
    for k in kernels:
        edges.update(x for x in k.knots if interval.lo < x < interval.hi)
    edges = np.array(sorted(edges))
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x).ravel()
    wt = (half[:, None] * w).ravel()
    return t, wt


def lsq_coefficients(interval, exponents, nodes=48, max_condition=1e12):
    """Least-squares reproduction of ``exp(e_m t)`` by arbitrary shifted kernels.

    Solves the normal equations ``<f, k_n> = sum_k c_k <k_k, k_n>`` with
    inner products over the interval by composite Gauss-Legendre quadrature
    split at every kernel knot.

    Parameters
    ----------
    interval : KnotFreeInterval
        Interval and shifted kernels (knots inside are allowed here).
    exponents : sequence of complex
    nodes : int
        Gauss-Legendre nodes per smooth sub-interval.
    max_condition : float
        Above this Gram condition number a truncated-SVD solve is used and a
        warning is attached.

    Returns
    -------
    ReproductionCoefficients
    """
    exponents = np.atleast_1d(np.asarray(exponents, dtype=complex))
    t, wt = _gauss_grid(interval, interval.kernels, nodes)
    K = np.array([k(t) for k in interval.kernels])
    gram = (K * wt) @ K.T
    rhs = (K * wt) @ np.exp(np.multiply.outer(exponents, t)).T
    notes = []
    cond = np.linalg.cond(gram)
    if cond > max_condition:
        notes.append(f"ill-conditioned Gram matrix (condition {cond:.3g})")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
        coefs = lstsq(gram, rhs, cond=1.0 / max_condition)[0]
    else:
        coefs = np.linalg.solve(gram, rhs)
    result = ReproductionCoefficients(coefs.T, exponents, (), interval, warnings=notes)
    return _score(result, exponents, ())


def find_knot_free_interval(spikes, spacing, kernels=(), eps=0.0, knot_tol=1e-12):
    """Interval ``(t_last - spacing + eps, t_first - eps)`` used by the decoders.

    ``spikes`` lists the anchor spike followed by the spikes whose samples
    are used; ``spacing`` is the knot spacing ``L / P`` of the kernel.
    When ``kernels`` are given they are checked to be knot-free on the
    interval.

    Raises
    ------
    ReproductionError
        If the interval is empty or a knot lies inside it.
    """
    lo = spikes[-1] - spacing + eps
    hi = spikes[0] - eps
    if not hi > lo:
        raise ReproductionError(f"empty interval: spikes span {spikes[-1] - spikes[0]:.6g} "
                                f">= {spacing - 2 * eps:.6g}")
    interval = KnotFreeInterval(lo, hi, tuple(kernels))
    for k in kernels:
        _check_exact(interval, k, knot_tol)
    return interval

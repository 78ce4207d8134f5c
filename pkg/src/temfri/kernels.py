"""Piecewise closed-form sampling kernels.

Every kernel is stored as a list of pieces. On its interval a piece equals

    sum_j a_j exp(r_j (t - origin)) + sum_p c_p (t - origin)**p + tabulated part

which is closed under shifting, scaling, reflection, addition, differentiation
and integration. Polynomial B-splines, exponential E-splines, their
derivatives and their convolutions with a box all stay exact in this form.
Only the transition zones of a pulse-convolved kernel are tabulated.
"""

import ast
import operator
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.interpolate import CubicSpline

RATE_TOL = 1e-12
TABLE_STEP = 1e-4


def _as_complex(values):
    return np.atleast_1d(np.asarray(values, dtype=complex))


@dataclass(frozen=True, eq=False)
class Piece:
    """One analytic piece of a kernel.

    Parameters
    ----------
    lo, hi : float
        Interval covered by the piece (``hi`` may be ``inf``).
    origin : float
        Expansion point of the exponential and polynomial terms.
    rates, coefs : ndarray
        Exponential rates ``r_j`` and their weights ``a_j``.
    poly : ndarray
        Polynomial coefficients in ascending powers of ``t - origin``.
    tables : tuple
        Tabulated contributions ``scale * pp(flip * (t - offset))`` given as
        ``(pp, offset, scale, flip)`` tuples.
    """

    lo: float
    hi: float
    origin: float
    rates: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    coefs: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    poly: np.ndarray = field(default_factory=lambda: np.zeros(1, complex))
    tables: tuple = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.origin
        out = np.zeros(t.shape, dtype=complex)
        if self.rates.size:
            out += np.exp(np.multiply.outer(s, self.rates)) @ self.coefs
        if self.poly.size:
            out += np.polynomial.polynomial.polyval(s, self.poly)
        for pp, offset, scale, flip in self.tables:
            out += scale * pp(flip * (t - offset))
        return out

    @property
    def is_exact(self):
        return not self.tables

    def rebased(self, origin):
        d = origin - self.origin
        if d == 0:
            return self
        coefs = self.coefs * np.exp(self.rates * d)
        poly = np.zeros_like(self.poly)
        for k, c in enumerate(self.poly):
            for j in range(k + 1):
                poly[j] += c * comb(k, j) * d ** (k - j)
        return Piece(self.lo, self.hi, origin, self.rates, coefs, poly, self.tables)

    def restricted(self, lo, hi):
        return Piece(lo, hi, self.origin, self.rates, self.coefs, self.poly, self.tables)

    def shifted(self, d):
        tables = tuple((pp, off + d, sc, fl) for pp, off, sc, fl in self.tables)
        return Piece(self.lo + d, self.hi + d, self.origin + d, self.rates, self.coefs,
                     self.poly, tables)

    def scaled(self, c):
        tables = tuple((pp, off, sc * c, fl) for pp, off, sc, fl in self.tables)
        return Piece(self.lo, self.hi, self.origin, self.rates, self.coefs * c,
                     self.poly * c, tables)

    def reflected(self):
        signs = (-1.0) ** np.arange(self.poly.size)
        tables = tuple((pp, -off, sc, -fl) for pp, off, sc, fl in self.tables)
        return Piece(-self.hi, -self.lo, -self.origin, -self.rates, self.coefs,
                     self.poly * signs, tables)

    def derivative(self):
        poly = self.poly[1:] * np.arange(1, self.poly.size) if self.poly.size > 1 else np.zeros(1, complex)
        tables = tuple((pp.derivative(), off, sc * fl, fl) for pp, off, sc, fl in self.tables)
        return Piece(self.lo, self.hi, self.origin, self.rates, self.coefs * self.rates,
                     poly, tables)._merged()

    def primitive(self):
        """Antiderivative on the piece, up to an additive constant."""
        flat = np.abs(self.rates) <= RATE_TOL
        poly = np.zeros(self.poly.size + 1, complex)
        poly[1:] = self.poly / np.arange(1, self.poly.size + 1)
        poly[1] += self.coefs[flat].sum()
        rates = self.rates[~flat]
        coefs = self.coefs[~flat] / rates
        tables = tuple((pp.antiderivative(), off, sc * fl, fl) for pp, off, sc, fl in self.tables)
        return Piece(self.lo, self.hi, self.origin, rates, coefs, poly, tables)

    def plus(self, other):
        """Sum of two pieces defined on the same interval."""
        other = other.rebased(self.origin)
        n = max(self.poly.size, other.poly.size)
        poly = np.zeros(n, complex)
        poly[:self.poly.size] += self.poly
        poly[:other.poly.size] += other.poly
        if np.array_equal(self.rates, other.rates):
            # same exponentials, e.g. two shifts of one kernel
            return Piece(self.lo, self.hi, self.origin, self.rates, self.coefs + other.coefs,
                         poly, self.tables + other.tables)
        return Piece(self.lo, self.hi, self.origin,
                     np.concatenate([self.rates, other.rates]),
                     np.concatenate([self.coefs, other.coefs]),
                     poly, self.tables + other.tables)._merged()

    def plus_constant(self, c):
        poly = self.poly.copy()
        poly[0] += c
        return Piece(self.lo, self.hi, self.origin, self.rates, self.coefs, poly, self.tables)

    def _merged(self):
        # fold zero rates into the polynomial and combine equal rates
        flat = np.abs(self.rates) <= RATE_TOL
        poly = self.poly.copy() if self.poly.size else np.zeros(1, complex)
        poly[0] += self.coefs[flat].sum()
        r, a = self.rates[~flat], self.coefs[~flat]
        close = np.abs(r[:, None] - r[None, :]) <= RATE_TOL * np.maximum(1.0, np.abs(r))[:, None]
        if np.count_nonzero(close) == r.size:
            return Piece(self.lo, self.hi, self.origin, r, a, poly, self.tables)
        keep, group = np.unique(np.argmax(close, axis=1), return_inverse=True)
        coefs = np.zeros(len(keep), dtype=complex)
        np.add.at(coefs, group, a)
        return Piece(self.lo, self.hi, self.origin, r[keep], coefs, poly, self.tables)

    def exponential_terms(self, origin=0.0):
        """Return ``{rate: weight}`` of the exponential part about ``origin``."""
        p = self.rebased(origin)
        return dict(zip(p.rates, p.coefs))


class Piecewise:
    """Sum of non-overlapping pieces; zero outside them."""

    def __init__(self, pieces):
        self.pieces = sorted(pieces, key=lambda p: p.lo)
        self._edges = np.array([p.lo for p in self.pieces])

    @property
    def support(self):
        if not self.pieces:
            return (0.0, 0.0)
        return (self.pieces[0].lo, self.pieces[-1].hi)

    @property
    def knots(self):
        """Sorted breakpoints between pieces (including the support ends)."""
        pts = {p.lo for p in self.pieces} | {p.hi for p in self.pieces}
        return np.array(sorted(x for x in pts if np.isfinite(x)))

    def evaluate(self, t):
        """Complex values at ``t`` (array or scalar)."""
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.zeros(flat.shape, dtype=complex)
        if self.pieces:
            idx = np.searchsorted(self._edges, flat, side="right") - 1
            for i in np.unique(idx[idx >= 0]):
                piece = self.pieces[i]
                sel = (idx == i) & (flat < piece.hi)
                if sel.any():
                    out[sel] = piece(flat[sel])
        return out.reshape(t.shape)

    def __call__(self, t):
        """Real part of :meth:`evaluate`."""
        return self.evaluate(t).real

    def piece_at(self, t):
        """Piece whose interval contains ``t``, or ``None``."""
        i = np.searchsorted(self._edges, t, side="right") - 1
        if i < 0 or t >= self.pieces[i].hi:
            return None
        return self.pieces[i]

    def map_pieces(self, fn):
        return type(self)([fn(p) for p in self.pieces])

    def shifted(self, d):
        return self.map_pieces(lambda p: p.shifted(d))

    def scaled(self, c):
        return self.map_pieces(lambda p: p.scaled(c))

    def reflected(self):
        """The function ``t -> self(-t)``."""
        return self.map_pieces(lambda p: p.reflected())

    def derivative(self):
        return self.map_pieces(lambda p: p.derivative())

    def cumulative(self):
        """Running integral from the left end of the support.

        The result carries a constant tail piece to ``+inf``. It is computed
        once per instance; kernels are not modified in place.
        """
        cached = self.__dict__.get("_cumulative")
        if cached is not None:
            return cached
        out, total = [], 0.0
        for p in self.pieces:
            prim = p.primitive()
            start = prim(np.array([p.lo]))[0]
            out.append(prim.plus_constant(total - start))
            total = total - start + prim(np.array([p.hi]))[0]
        if self.pieces:
            hi = self.pieces[-1].hi
            poly = np.array([total], dtype=complex)
            out.append(Piece(hi, np.inf, hi, poly=poly))
        self._cumulative = Piecewise(out)
        return self._cumulative

    def integral(self, a, b):
        """Exact integral over ``[a, b]``."""
        if a == b:
            return 0.0
        cum = self.cumulative()
        vals = cum.evaluate(np.array([a, b]))
        return (vals[1] - vals[0]).real

    def __add__(self, other):
        return add_piecewise(self, other)

    def __sub__(self, other):
        return add_piecewise(self, other.scaled(-1.0))


def add_piecewise(first, second):
    """Pointwise sum, splitting at the union of both breakpoint sets."""
    edges = sorted({p.lo for p in first.pieces} | {p.hi for p in first.pieces}
                   | {p.lo for p in second.pieces} | {p.hi for p in second.pieces})
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 1e-14 * max(1.0, abs(lo)):
            continue
        probe = lo + 0.5 * (hi - lo) if np.isfinite(hi) else lo + 1.0
        a, b = first.piece_at(probe), second.piece_at(probe)
        if a is None and b is None:
            continue
        if a is None:
            out.append(b.restricted(lo, hi))
        elif b is None:
            out.append(a.restricted(lo, hi))
        else:
            out.append(a.restricted(lo, hi).plus(b))
    return type(first)(out) if type(first) is type(second) else Piecewise(out)


@dataclass(frozen=True)
class BoxFunction:
    """Indicator of ``[0, width]``."""

    width: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return ((t >= 0) & (t <= self.width)).astype(float)


@dataclass(frozen=True)
class PulseShape:
    """Compactly supported pulse ``g`` on ``[-eps, eps]``."""

    func: object
    eps: float
    name: str = "pulse"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(np.abs(t) <= self.eps, self.func(t), 0.0)


def cos2_pulse(eps):
    """Cosine-squared pulse ``cos(t)**2`` truncated to ``[-eps, eps]``."""
    return PulseShape(lambda t: np.cos(t) ** 2, eps, "cos2")


class SplineKernel(Piecewise):
    """Anti-causal kernel with descriptor metadata.

    Attributes
    ----------
    kind : str
        ``"bspline"``, ``"espline"``, ``"derivative"``, ``"box"``, ``"pulse"``
        or ``"sum"``.
    exponents : ndarray
        Exponents the kernel reproduces locally (``exp(e * t)``), when known.
    length : float
        Support length of the underlying spline.
    order : int
        Number of first-order factors.
    """

    def __init__(self, pieces, kind="sum", exponents=(), length=None, order=None, params=None):
        super().__init__(pieces)
        self.kind = kind
        self.exponents = _as_complex(exponents) if len(exponents) else np.zeros(0, complex)
        self.length = length
        self.order = order
        self.params = dict(params or {})

    def map_pieces(self, fn):
        return SplineKernel([fn(p) for p in self.pieces], self.kind, self.exponents,
                            self.length, self.order, self.params)

    @property
    def knot_spacing(self):
        return self.length / self.order

    def descriptor(self):
        """JSON-friendly description."""
        d = {"kind": self.kind, "L": self.length, "P": self.order}
        if self.exponents.size:
            d["frequencies"] = [float(w) for w in self.exponents.imag]
        d.update(self.params)
        return d

    def __repr__(self):
        return f"SplineKernel({self.kind}, P={self.order}, L={self.length}, pieces={len(self.pieces)})"


def make_espline(exponents, length=None):
    """Anti-causal E-spline reproducing ``exp(e_m t)`` for each exponent.

    The kernel is the convolution of ``P`` first-order pieces
    ``exp(e_m t)`` on ``[-w, 0]`` with ``w = L / P``, so its support is
    ``[-L, 0]`` with knots at ``-L + n w``.

    Parameters
    ----------
    exponents : sequence of complex
        Distinct exponents; use ``1j * omega`` to reproduce ``exp(j omega t)``.
        Conjugate-closed sets give a real kernel.
    length : float, optional
        Support length ``L``; defaults to ``P``.

    Returns
    -------
    SplineKernel

    Raises
    ------
    ValueError
        If the list is empty or contains repeated exponents.
    """
    gammas = _as_complex(exponents)
    order = gammas.size
    if order == 0:
        raise ValueError("at least one exponent is required")
    for i in range(order):
        for j in range(i):
            if abs(gammas[i] - gammas[j]) <= 1e-12 * max(1.0, abs(gammas[i])):
                raise ValueError("repeated exponents are not supported")
    length = float(order if length is None else length)
    w = length / order
    # causal companion psi(t) = kernel(-t) is built from alpha_m = -gamma_m
    alphas = -gammas
    residues = np.array([1.0 / np.prod([alphas[m] - alphas[l] for l in range(order) if l != m])
                         for m in range(order)])
    d = np.array([1.0 + 0j])
    for a in alphas:
        d = np.convolve(d, [1.0, -np.exp(a * w)])
    pieces = []
    for n in range(order):
        # psi on [n w, (n+1) w) expanded about t = n w
        coefs = np.zeros(order, complex)
        for k in range(n + 1):
            coefs += d[k] * residues * np.exp(alphas * (n - k) * w)
        causal = Piece(n * w, (n + 1) * w, n * w, alphas.copy(), coefs, np.zeros(1, complex))
        pieces.append(causal.reflected())
    return SplineKernel(pieces, "espline", gammas, length, order)


def make_bspline(order):
    """Anti-causal polynomial B-spline of degree ``order``, support ``[-(P+1), 0]``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    box = Piecewise([Piece(-1.0, 0.0, 0.0, poly=np.ones(1, complex))])
    kernel = box
    for _ in range(order):
        kernel = _convolve_with_box(kernel, 1.0, anchor=-1.0)
    return SplineKernel(kernel.pieces, "bspline", (), float(order + 1), order + 1,
                        {"degree": order})


def _convolve_with_box(kernel, width, anchor=0.0):
    # (k * 1_[anchor, anchor + width])(t) = Phi(t - anchor) - Phi(t - anchor - width)
    cum = kernel.cumulative()
    out = add_piecewise(cum.shifted(anchor), cum.shifted(anchor + width).scaled(-1.0))
    hi = kernel.support[1] + anchor + width
    return Piecewise([p.restricted(p.lo, min(p.hi, hi)) for p in out.pieces
                      if p.lo < hi - 1e-15])


def convolve_box(kernel, width):
    """Exact ``kernel * q_width`` with ``q_width`` the indicator of ``[0, width]``."""
    if width <= 0:
        raise ValueError("box width must be positive")
    out = _convolve_with_box(kernel, width)
    params = dict(getattr(kernel, "params", {}), box=float(width))
    return SplineKernel(out.pieces, "box", getattr(kernel, "exponents", ()),
                        getattr(kernel, "length", None), getattr(kernel, "order", None), params)


def derivative_kernel(kernel):
    """Derivative of a kernel, keeping its metadata."""
    out = kernel.derivative()
    out.kind = "derivative"
    return out


def pulse_transform(pulse, rate):
    """``G(rate) = int g(s) exp(-rate s) ds`` over the pulse support by quadrature."""
    from scipy.integrate import quad
    re = quad(lambda s: pulse.func(s) * np.exp(-rate * s).real, -pulse.eps, pulse.eps,
              epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    im = quad(lambda s: pulse.func(s) * np.exp(-rate * s).imag, -pulse.eps, pulse.eps,
              epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return re + 1j * im


def _pointwise_convolution(kernel, pulse, t, nodes=24):
    """Direct ``(kernel * g)(t)``, splitting the pulse integral at kernel knots."""
    x, wts = np.polynomial.legendre.leggauss(nodes)
    knots = kernel.knots
    out = np.zeros(len(t))
    for i, ti in enumerate(t):
        cuts = ti - knots
        cuts = np.sort(cuts[(cuts > -pulse.eps) & (cuts < pulse.eps)])
        edges = np.concatenate([[-pulse.eps], cuts, [pulse.eps]])
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            s = 0.5 * (b - a) * x + 0.5 * (a + b)
            total += 0.5 * (b - a) * np.sum(wts * pulse.func(s) * kernel(ti - s))
        out[i] = total
    return out


def convolve_pulse(kernel, pulse, step=TABLE_STEP):
    """``kernel * g`` for a pulse supported on ``[-eps, eps]``.

    Away from the kernel knots each piece stays exact, with its exponential
    weights multiplied by ``G(rate)``. Zones of width ``2 eps`` around the
    knots are tabulated with cubic interpolation on a grid of ``step``.

    Raises
    ------
    ValueError
        If ``2 eps`` exceeds the knot spacing of the kernel.
    """
    eps = pulse.eps
    if eps == 0:
        return kernel
    knots = kernel.knots
    if 2 * eps > np.min(np.diff(knots)) + 1e-15:
        raise ValueError("pulse support 2*eps exceeds the knot spacing of the kernel")
    pieces = []
    for p in kernel.pieces:
        if not p.is_exact or p.poly.size > 1 or abs(p.poly[0]) > 0:
            raise ValueError("pulse convolution needs purely exponential pieces")
        lo, hi = p.lo + eps, p.hi - eps
        if hi > lo:
            gains = np.array([pulse_transform(pulse, r) for r in p.rates])
            pieces.append(Piece(lo, hi, p.origin, p.rates, p.coefs * gains, np.zeros(1, complex)))
    for k in knots:
        lo, hi = k - eps, k + eps
        n = max(int(np.ceil((hi - lo) / step)), 4)
        grid = np.linspace(lo, hi, n + 1)
        values = _pointwise_convolution(kernel, pulse, grid)
        pp = CubicSpline(grid, values)
        pieces.append(Piece(lo, hi, lo, tables=((pp, 0.0, 1.0, 1.0),)))
    params = dict(kernel.params, pulse=pulse.name, eps=float(eps))
    return SplineKernel(pieces, "pulse", kernel.exponents, kernel.length, kernel.order, params)


def antiderivative(kernel, a, b):
    """Exact integral of ``kernel`` over ``[a, b]``."""
    if a > b:
        raise ValueError("expected a <= b")
    return kernel.integral(a, b)


def parse_kernel(text):
    """Build a kernel from the mini-grammar ``kind:key=value,...``.

    Examples: ``espline:P=2,w0=pi/3,L=2``, ``bspline:P=3``,
    ``dspline:P=4,w0=pi/3,L=4`` (derivative of an E-spline).
    Frequencies follow the symmetric ladder ``w0 + lambda m`` with
    ``lambda = -2 w0 / (P - 1)``; an explicit list may be given as
    ``w=pi/3;-pi/3``.
    """
    kind, _, rest = text.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        opts[key.strip()] = value.strip()
    kind = kind.strip().lower()
    if kind == "bspline":
        return make_bspline(int(opts.get("P", 3)))
    if kind in ("espline", "dspline"):
        order = int(opts.get("P", 2))
        if "w" in opts:
            omegas = [parse_number(v) for v in opts["w"].split(";")]
        else:
            omegas = frequency_ladder(parse_number(opts.get("w0", "pi/3")), order)
        kernel = make_espline(1j * np.asarray(omegas), parse_number(opts.get("L", str(order))))
        return derivative_kernel(kernel) if kind == "dspline" else kernel
    raise ValueError(f"unknown kernel kind {kind!r}")


def frequency_ladder(w0, count):
    """Symmetric ladder ``w0 + lambda m`` with ``lambda = -2 w0 / (count - 1)``."""
    if count == 1:
        return np.array([w0])
    step = -2.0 * w0 / (count - 1)
    return w0 + step * np.arange(count)


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow}


def parse_number(text):
    """Evaluate a real constant such as ``2``, ``-pi/3`` or ``0.9*pi/4``.

    Only numbers, ``pi`` and the operators ``+ - * / **`` are accepted.
    """
    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return np.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            value = walk(node.operand)
            return -value if isinstance(node.op, ast.USub) else value
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.left), walk(node.right))
        raise ValueError(f"not a numeric constant: {text!r}")

    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as err:
        raise ValueError(f"not a numeric constant: {text!r}") from err
    return float(walk(tree))

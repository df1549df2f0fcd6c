"""Quantized calculus on the circle.

The symmetry operator ``S`` is the Hilbert transform with kernel
``1 + i cot((phi - psi)/2)``; on Fourier modes it is ``diag(s_k)`` with
``s_k = +1`` for ``k >= 0`` and ``-1`` for ``k < 0``.  The quantum
differential of a loop ``f`` is the commutator ``d^q f = [S, M_f]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import bernoulli

from .circle_maps import CircleMap
from .composition import OneParticleOperator
from .fourier import FourierLoop, ModeSpec, h_half_norm

# HS(d^q f) / ||f||_{1/2}: each mode k contributes |k| entries of modulus 2|f_k|
HS_SOBOLEV_RATIO = 2.0


def _with_zero(spec: ModeSpec) -> ModeSpec:
    return spec if spec.include_zero else ModeSpec(spec.n, True)


@dataclass(frozen=True, eq=False)
class SymmetryOperator:
    spec: ModeSpec
    diagonal: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal).astype(complex)

    def apply(self, f: FourierLoop) -> FourierLoop:
        if f.spec != self.spec:
            f = f.resized(self.spec)
        return FourierLoop(self.spec, self.diagonal * f.coeffs)

    def operator(self) -> OneParticleOperator:
        return OneParticleOperator(self.spec, self.matrix, "S")


def hilbert_transform(spec: ModeSpec) -> SymmetryOperator:
    return SymmetryOperator(spec, np.where(spec.modes >= 0, 1.0, -1.0))


def pv_hilbert_values(values: np.ndarray) -> np.ndarray:
    """Principal-value quadrature of the Hilbert kernel on an even uniform grid.

    Uses the odd-offset rule: nodes ``psi = phi -/+ j h`` with ``j`` odd are
    paired so the cotangent singularity cancels and the diagonal is skipped.
    """
    v = np.asarray(values, complex)
    m = v.size
    if m % 2:
        raise ValueError("PV quadrature needs an even number of nodes")
    out = np.full(m, v.mean())
    acc = np.zeros(m, complex)
    for j in range(1, m, 2):
        acc += (1.0 / np.tan(np.pi * j / m)) * np.roll(v, j)
    return out + 1j * (2.0 / m) * acc


def hilbert_quadrature_oracle(f: FourierLoop, grid: int) -> FourierLoop:
    """Apply ``S`` to ``f`` by direct PV quadrature on ``grid`` points and read
    off the Fourier coefficients of the result."""
    spec = _with_zero(f.spec)
    if grid % 2 or grid < 8 * spec.n:
        raise ValueError(f"grid must be even and >= 8N = {8 * spec.n}")
    theta = 2 * np.pi * np.arange(grid) / grid
    vals = np.asarray(f.evaluate(theta), complex)
    sf = pv_hilbert_values(vals)
    c = np.fft.fft(sf) / grid
    return FourierLoop(spec, c[np.mod(spec.modes, grid)])


def mult_operator(f: FourierLoop, spec: ModeSpec | None = None) -> OneParticleOperator:
    """Matrix of ``v -> f v`` on ``spec`` (zero mode included): entries ``f_{m-n}``."""
    spec = _with_zero(spec or f.spec)
    k = spec.modes
    diff = np.subtract.outer(k, k)
    table = {int(j): f.coeff(int(j)) for j in np.unique(diff)}
    m = np.vectorize(table.__getitem__, otypes=[complex])(diff)
    return OneParticleOperator(spec, m, "M_f")


@dataclass(frozen=True, eq=False)
class QuantumDifferential:
    f: FourierLoop
    op: OneParticleOperator

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    def rank(self, threshold: float = 1e-10) -> int:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > threshold))

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def closed_form(self) -> np.ndarray:
        """Entries ``(s_m - s_n) f_{m-n}`` built directly."""
        s = hilbert_transform(self.op.spec).diagonal
        k = self.op.spec.modes
        diff = np.subtract.outer(k, k)
        fvals = np.vectorize(lambda j: self.f.coeff(int(j)), otypes=[complex])(diff)
        return np.subtract.outer(s, s) * fvals


def quantum_differential(f: FourierLoop, spec: ModeSpec | None = None) -> QuantumDifferential:
    """``d^q f = S M_f - M_f S`` on ``spec`` (defaults to twice the band of ``f``)."""
    spec = _with_zero(spec or ModeSpec(2 * f.spec.n))
    S = hilbert_transform(spec).matrix
    M = mult_operator(f, spec).matrix
    return QuantumDifferential(f, OneParticleOperator(spec, S @ M - M @ S, "d^q f"))


def kernel_quadrature_dq(f: FourierLoop, spec: ModeSpec, grid: int = 8192,
                         chunk: int = 512) -> np.ndarray:
    """Matrix of the integral operator with kernel ``K(phi, psi) (f(psi) - f(phi))``
    by trapezoidal quadrature in both variables.

    The kernel is smooth and periodic; on the diagonal it equals ``-2i f'(phi)``.
    This is ``[S, M_f]`` assembled without any Fourier-side algebra.
    """
    spec = _with_zero(spec)
    theta = 2 * np.pi * np.arange(grid) / grid
    fv = np.asarray(f.evaluate(theta), complex)
    dfv = np.asarray(f.derivative(theta), complex)
    k = spec.modes
    right = np.exp(1j * np.multiply.outer(theta, k))        # e^{i n psi}
    out = np.zeros((k.size, k.size), complex)
    for start in range(0, grid, chunk):
        rows = slice(start, min(start + chunk, grid))
        t = np.subtract.outer(theta[rows], theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = (1.0 + 1j / np.tan(0.5 * t)) * (fv[None, :] - fv[rows, None])
        idx = np.arange(rows.start, rows.stop)
        kern[idx - rows.start, idx] = -2j * dfv[rows]
        left = np.exp(-1j * np.multiply.outer(k, theta[rows]))   # e^{-i m phi}
        out += left @ (kern @ right)
    return out / grid ** 2


@dataclass(frozen=True)
class HSReport:
    hs: float
    sobolev: float
    ratio: float | None


def hs_norm_vs_sobolev(f: FourierLoop, spec: ModeSpec | None = None) -> HSReport:
    hs = quantum_differential(f, spec).hs_norm()
    sob = h_half_norm(f)
    return HSReport(hs, sob, None if sob == 0 else hs / sob)


# finite-difference operator -------------------------------------------------


def _gregory_corrections(order: int) -> np.ndarray:
    # end weights c_i (nodes i = 0..order-1) cancelling the Euler-Maclaurin
    # endpoint terms of the trapezoid rule through degree order-1
    b = bernoulli(order + 1)
    q = np.arange(order)
    nodes = np.arange(order, dtype=float)
    vander = nodes[None, :] ** q[:, None]
    target = np.where(q % 2 == 1, b[np.minimum(q + 1, order)] / (q + 1), 0.0)
    return np.linalg.solve(vander, target)


def gregory_weights(m: int, order: int = 8) -> np.ndarray:
    """Weights (in units of the step) for ``m + 1`` equispaced nodes on a closed interval."""
    if m + 1 < 2 * order:
        raise ValueError("too few nodes for the requested end-correction order")
    w = np.ones(m + 1)
    w[0] = w[-1] = 0.5
    c = _gregory_corrections(order)
    w[:order] += c
    w[-order:] += c[::-1]
    return w


def _values_and_slope(f, theta):
    if isinstance(f, CircleMap):
        step = 1e-6
        return f.lift(theta), (f.lift(theta + step) - f.lift(theta - step)) / (2 * step)
    return np.asarray(f.evaluate(theta), complex), np.asarray(f.derivative(theta), complex)


def finite_difference_op(f, grid: int = 1024, order: int = 8) -> np.ndarray:
    """Nodal matrix of ``v -> (1/2pi) int (f(phi) - f(psi)) / (phi - psi) v(psi) dpsi``.

    ``f`` is a loop or a circle map (its lift is used).  Rows are the grid
    angles ``phi_j``; the endpoint-corrected trapezoid rule in ``psi`` is
    folded onto the periodic grid, so ``G @ v(theta)`` approximates the
    integral for periodic ``v``.
    """
    n = f.spec.n if isinstance(f, FourierLoop) else 0
    if grid < 8 * n:
        raise ValueError(f"grid must be >= 8N = {8 * n}")
    theta = 2 * np.pi * np.arange(grid + 1) / grid
    fv, dfv = _values_and_slope(f, theta)
    fv = np.asarray(fv, complex)
    t = np.subtract.outer(theta[:-1], theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.subtract.outer(fv[:-1], fv) / t
    j = np.arange(grid)
    kern[j, j] = dfv[:-1]
    w = gregory_weights(grid, order) / grid
    g = kern * w[None, :]
    g[:, 0] += g[:, -1]
    return g[:, :-1]


def finite_difference_matrix(f, spec: ModeSpec, grid: int = 1024) -> OneParticleOperator:
    """Fourier matrix of the finite-difference operator on ``spec``."""
    g = finite_difference_op(f, grid)
    theta = 2 * np.pi * np.arange(grid) / grid
    k = spec.modes
    left = np.exp(-1j * np.multiply.outer(k, theta)) / grid
    right = np.exp(1j * np.multiply.outer(theta, k))
    return OneParticleOperator(spec, left @ g @ right, "delta f")


def dq_kernel(f: FourierLoop, phi, psi) -> np.ndarray:
    """``K(phi, psi) (f(phi) - f(psi))`` off the diagonal."""
    return (1.0 + 1j / np.tan(0.5 * (np.asarray(phi) - np.asarray(psi)))) * (
        np.asarray(f.evaluate(phi), complex) - np.asarray(f.evaluate(psi), complex))


@dataclass(frozen=True)
class QuasiclassicalReport:
    defect: float
    raw_defects: tuple


def quasiclassical_check(f: FourierLoop, eps: float = 2 * np.pi / 4096,
                         grid: int = 256) -> QuasiclassicalReport:
    """Diagonal limit of the ``d^q f`` kernel against ``2i f'``.

    The kernel is sampled at ``psi = phi + eps, eps/2, eps/4``; two rounds of
    Richardson extrapolation remove the first- and second-order terms.
    """
    phi = 2 * np.pi * np.arange(grid) / grid
    target = 2j * np.asarray(f.derivative(phi), complex)
    g = [dq_kernel(f, phi, phi + e) for e in (eps, eps / 2, eps / 4)]
    r1 = 2 * g[1] - g[0]
    r2 = 2 * g[2] - g[1]
    limit = (4 * r2 - r1) / 3
    raw = tuple(float(np.max(np.abs(x - target))) for x in g)
    return QuasiclassicalReport(float(np.max(np.abs(limit - target))), raw)


def compress_plus(op: OneParticleOperator) -> np.ndarray:
    """``W+ -> W+`` block (modes ``1..N`` in increasing order)."""
    modes = op.spec.modes
    idx = np.array([np.flatnonzero(modes == k)[0] for k in range(1, op.spec.n + 1)])
    return op.matrix[np.ix_(idx, idx)]


def map_displacement(h: CircleMap, n: int, grid: int = 4096) -> FourierLoop:
    """Periodic part ``h(theta) - theta`` (mean removed) truncated to ``|k| <= n``."""
    theta = 2 * np.pi * np.arange(grid) / grid
    c = np.fft.fft(h.lift(theta) - theta) / grid
    spec = ModeSpec(n)
    return FourierLoop(spec, c[np.mod(spec.modes, grid)], True)


def map_quantum_differential(h: CircleMap, n: int, grid: int = 1024) -> OneParticleOperator:
    """``d^q h = [S, delta h]`` on modes ``|k| <= n`` with the zero mode."""
    spec = ModeSpec(n, True)
    S = hilbert_transform(spec).matrix
    D = finite_difference_matrix(h, spec, grid).matrix
    return OneParticleOperator(spec, S @ D - D @ S, "d^q h")

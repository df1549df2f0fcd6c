"""Truncated bosonic Fock space over ``W+``.

Basis states ``P_K = x^K / sqrt(K!)`` are indexed by multi-indices of total
degree at most ``D``, where ``x_n`` is the coordinate along the n-th
Sobolev-orthonormal vector ``z^n / sqrt(n)``.  On monomials ``a_n^*`` is
multiplication by ``x_n`` and ``a_n`` is ``d/dx_n``, so

    a_n^* P_K = sqrt(k_n + 1) P_{K + e_n},    a_n P_K = sqrt(k_n) P_{K - e_n}.

Anything that would leave the degree bound is dropped.  Operator identities
hold exactly on the *interior*, the states whose degree leaves room for the
largest degree shift involved.

The inner product is antilinear in its first argument, which makes the
coherent-state overlap ``<e^{Z1/2}, e^{Z2/2}> = det(1 - conj(Z1) Z2)^{-1/2}``.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .siegel import SiegelPoint, SymplecticElement, act


@dataclass(frozen=True)
class FockConfig:
    n_modes: int
    max_degree: int
    lam: float = 1.0

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("need at least one mode")
        if self.max_degree < 2:
            raise ValueError("degree cutoff must be >= 2")
        if self.lam == 0:
            raise ValueError("central constant must be nonzero")

    @property
    def basis(self) -> FockBasis:
        return _basis(self.n_modes, self.max_degree)

    @property
    def dim(self) -> int:
        return len(self.basis.indices)


@dataclass(frozen=True)
class FockBasis:
    indices: tuple
    lookup: dict
    degrees: np.ndarray

    def position(self, K) -> int:
        try:
            return self.lookup[tuple(K)]
        except KeyError:
            raise ValueError(f"multi-index {tuple(K)} outside the truncated basis") from None


@lru_cache(maxsize=32)
def _basis(n: int, d: int) -> FockBasis:
    idx = []
    for deg in range(d + 1):
        # all compositions of deg into n nonnegative parts, lexicographic
        for combo in itertools.combinations_with_replacement(range(n), deg):
            K = [0] * n
            for c in combo:
                K[c] += 1
            idx.append(tuple(K))
    # combinations_with_replacement yields each multiset once
    lookup = {K: i for i, K in enumerate(idx)}
    return FockBasis(tuple(idx), lookup, np.array([sum(K) for K in idx]))


@dataclass(frozen=True, eq=False)
class FockState:
    config: FockConfig
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, complex)
        if c.shape != (self.config.dim,):
            raise ValueError(f"expected {self.config.dim} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: FockState) -> FockState:
        return FockState(self.config, self.coeffs + other.coeffs)

    def scale(self, c: complex) -> FockState:
        return FockState(self.config, c * self.coeffs)

    def coefficient(self, K) -> complex:
        return complex(self.coeffs[self.config.basis.position(K)])


def vacuum(config: FockConfig) -> FockState:
    c = np.zeros(config.dim, complex)
    c[0] = 1.0
    return FockState(config, c)


def basis_state(config: FockConfig, K) -> FockState:
    if len(K) != config.n_modes:
        raise ValueError(f"multi-index length {len(K)} != {config.n_modes} modes")
    if sum(K) > config.max_degree:
        raise ValueError(f"degree {sum(K)} exceeds cutoff {config.max_degree}")
    c = np.zeros(config.dim, complex)
    c[config.basis.position(K)] = 1.0
    return FockState(config, c)


def inner(f: FockState, g: FockState) -> complex:
    """``<f, g> = sum_K conj(f_K) g_K``."""
    if f.config != g.config:
        raise ValueError("states live in different truncated Fock spaces")
    return complex(np.vdot(f.coeffs, g.coeffs))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Sparse matrix on the truncated basis; ``shift`` bounds the degree change."""

    config: FockConfig
    matrix: sp.csr_matrix
    shift: tuple = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "matrix", sp.csr_matrix(self.matrix, dtype=complex))

    def apply(self, f: FockState) -> FockState:
        return FockState(self.config, self.matrix @ f.coeffs)

    def __matmul__(self, other: FockOperator) -> FockOperator:
        lo = self.shift[0] + other.shift[0]
        hi = self.shift[1] + other.shift[1]
        return FockOperator(self.config, self.matrix @ other.matrix, (lo, hi))

    def __add__(self, other: FockOperator) -> FockOperator:
        return FockOperator(self.config, self.matrix + other.matrix,
                            (min(self.shift[0], other.shift[0]), max(self.shift[1], other.shift[1])))

    def __sub__(self, other: FockOperator) -> FockOperator:
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> FockOperator:
        return FockOperator(self.config, c * self.matrix, self.shift)

    def adjoint(self) -> FockOperator:
        return FockOperator(self.config, self.matrix.conj().T, (-self.shift[1], -self.shift[0]))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def interior_columns(self, max_degree: int) -> np.ndarray:
        return np.flatnonzero(self.config.basis.degrees <= max_degree)

    def on_interior(self, max_degree: int) -> np.ndarray:
        """Dense columns for input states of degree ``<= max_degree``."""
        return self.matrix[:, self.interior_columns(max_degree)].toarray()


def commutator(x: FockOperator, y: FockOperator) -> FockOperator:
    return x @ y - y @ x


def identity_op(config: FockConfig) -> FockOperator:
    return FockOperator(config, sp.identity(config.dim, dtype=complex, format="csr"))


def zero_op(config: FockConfig) -> FockOperator:
    return FockOperator(config, sp.csr_matrix((config.dim, config.dim), dtype=complex))


def _check_mode(config: FockConfig, n: int) -> None:
    if not 1 <= n <= config.n_modes:
        raise IndexError(f"mode {n} outside 1..{config.n_modes}")


@lru_cache(maxsize=64)
def _ladder(config: FockConfig, n: int) -> sp.csr_matrix:
    basis = config.basis
    rows, cols, vals = [], [], []
    for j, K in enumerate(basis.indices):
        if basis.degrees[j] == config.max_degree:
            continue
        L = list(K)
        L[n - 1] += 1
        rows.append(basis.lookup[tuple(L)])
        cols.append(j)
        vals.append(np.sqrt(K[n - 1] + 1.0))
    return sp.csr_matrix((vals, (rows, cols)), shape=(config.dim, config.dim), dtype=complex)


def creation(config: FockConfig, n: int) -> FockOperator:
    """``a_n^*`` (modes numbered from 1)."""
    _check_mode(config, n)
    return FockOperator(config, _ladder(config, n), (1, 1))


def annihilation(config: FockConfig, n: int) -> FockOperator:
    """``a_n``, the adjoint of :func:`creation`."""
    _check_mode(config, n)
    return FockOperator(config, _ladder(config, n).conj().T, (-1, -1))


def _quadratic(config, coef, first, second, shift) -> FockOperator:
    coef = np.asarray(coef, complex)
    out = sp.csr_matrix((config.dim, config.dim), dtype=complex)
    n = config.n_modes
    for i in range(n):
        for j in range(n):
            if coef[i, j] != 0:
                out = out + coef[i, j] * (first(config, i + 1).matrix @ second(config, j + 1).matrix)
    return FockOperator(config, out, shift)


def heisenberg_rep(config: FockConfig, z, y=None) -> FockOperator:
    """``r(v)`` for ``v = (z, y)`` with ``z`` the ``W+`` and ``y`` the ``W-``
    coordinates (``y = conj(z)`` by default, i.e. a real loop).

    ``r(z) = sum z_n a_n^*`` multiplies by the linear form, ``r(y) = -sum y_n a_n``
    differentiates.
    """
    z = np.asarray(z, complex)
    y = np.conj(z) if y is None else np.asarray(y, complex)
    if z.shape != (config.n_modes,) or y.shape != (config.n_modes,):
        raise ValueError("coordinate vectors must have one entry per mode")
    out = sp.csr_matrix((config.dim, config.dim), dtype=complex)
    for k in range(config.n_modes):
        out = out + z[k] * _ladder(config, k + 1) - y[k] * _ladder(config, k + 1).conj().T
    return FockOperator(config, out, (-1, 1))


def central(config: FockConfig) -> FockOperator:
    return identity_op(config).scale(config.lam)


def omega_coords(z1, y1, z2, y2) -> complex:
    """Complex-bilinear symplectic form in orthonormal ``(W+, W-)`` coordinates."""
    return complex(-1j * (np.dot(z1, y2) - np.dot(y1, z2)))


# coherent states -------------------------------------------------------------


def _logdet_half(m) -> complex:
    # principal branch: sum of principal logs of the eigenvalues
    return 0.5 * complex(np.sum(np.log(np.linalg.eigvals(np.asarray(m, complex)).astype(complex))))


def _check_disc(z: np.ndarray) -> None:
    norm = np.linalg.norm(z, 2) if z.size else 0.0
    if norm >= 1:
        raise ValueError(f"||Z|| = {norm:.3f} >= 1: outside the Siegel disc")
    if norm > 0.5:
        warnings.warn(f"||Z|| = {norm:.3f} > 0.5: truncation tail may be large", stacklevel=3)


def coherent_state(config: FockConfig, Z) -> FockState:
    """``e^{Z/2} = sum_d (1/d!) (1/2 sum_{mn} Z_mn x_m x_n)^d`` up to degree ``D``."""
    z = Z.z if isinstance(Z, SiegelPoint) else np.asarray(Z, complex)
    if z.shape != (config.n_modes, config.n_modes):
        raise ValueError("Siegel point dimension does not match the number of modes")
    _check_disc(z)
    raise_two = _quadratic(config, 0.5 * z, creation, creation, (2, 2)).matrix
    term = vacuum(config).coeffs
    out = term.copy()
    for d in range(1, config.max_degree // 2 + 1):
        term = raise_two @ term / d
        out = out + term
    return FockState(config, out)


def normalized_coherent_state(config: FockConfig, Z) -> FockState:
    """``det(1 - conj(Z) Z)^{1/4} e^{Z/2}``."""
    z = Z.z if isinstance(Z, SiegelPoint) else np.asarray(Z, complex)
    det = np.linalg.det(np.eye(z.shape[0]) - z.conj() @ z).real
    return coherent_state(config, z).scale(det ** 0.25)


@dataclass(frozen=True)
class CoherentOverlap:
    truncated: complex
    closed_form: complex

    @property
    def relative_error(self) -> float:
        return abs(self.truncated - self.closed_form) / abs(self.closed_form)


def coherent_inner(config: FockConfig, Z1, Z2) -> CoherentOverlap:
    z1 = Z1.z if isinstance(Z1, SiegelPoint) else np.asarray(Z1, complex)
    z2 = Z2.z if isinstance(Z2, SiegelPoint) else np.asarray(Z2, complex)
    trunc = inner(coherent_state(config, z1), coherent_state(config, z2))
    closed = np.exp(-_logdet_half(np.eye(z1.shape[0]) - z1.conj() @ z2))
    return CoherentOverlap(trunc, complex(closed))


@dataclass(frozen=True)
class SegalImage:
    phase: complex
    target: SiegelPoint


def segal_action(A: SymplecticElement, Z: SiegelPoint) -> SegalImage:
    """``eps_Z -> mu(det(1 + a^{-1} conj(b) Z)^{1/2}) eps_{A.Z}``; ``mu`` is the
    radial projection onto the unit circle."""
    if np.linalg.cond(A.a) > 1e12:
        raise ValueError("block a is singular")
    target = act(A, Z)
    m = np.eye(A.n) + np.linalg.solve(A.a, A.b.conj() @ Z.z)
    root = np.exp(_logdet_half(m))
    return SegalImage(complex(root / abs(root)), target)


def segal_unitarity_defect(config: FockConfig, A: SymplecticElement,
                           Z1: SiegelPoint, Z2: SiegelPoint) -> tuple[float, float]:
    """``(|<U eps_1, U eps_2>|, |<eps_1, eps_2>|)`` from truncated states."""
    before = abs(inner(normalized_coherent_state(config, Z1), normalized_coherent_state(config, Z2)))
    im1, im2 = segal_action(A, Z1), segal_action(A, Z2)
    u1 = normalized_coherent_state(config, im1.target).scale(im1.phase)
    u2 = normalized_coherent_state(config, im2.target).scale(im2.phase)
    return abs(inner(u1, u2)), before


# symplectic algebra -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpAlgebraElement:
    """Element ``[[alpha, beta], [conj(gamma), -alpha^T]]`` of the complexified
    symplectic algebra; ``beta`` and ``gamma`` are symmetric."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        a, b, g = (np.atleast_2d(np.asarray(x, complex)) for x in (self.alpha, self.beta, self.gamma))
        if not a.shape == b.shape == g.shape or a.shape[0] != a.shape[1]:
            raise ValueError("alpha, beta, gamma must be square matrices of equal size")
        for name, m in (("beta", b), ("gamma", g)):
            if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * max(1.0, np.abs(m).max(initial=0.0)):
                raise ValueError(f"{name} must be symmetric")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", 0.5 * (b + b.T))
        object.__setattr__(self, "gamma", 0.5 * (g + g.T))

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def zero(cls, n: int) -> SpAlgebraElement:
        z = np.zeros((n, n), complex)
        return cls(z, z, z)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> SpAlgebraElement:
        def cplx():
            return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b, g = cplx(), cplx()
        return cls(scale * cplx(), scale * (b + b.T) / 2, scale * (g + g.T) / 2)

    def matrix(self) -> np.ndarray:
        return np.block([[self.alpha, self.beta], [self.gamma.conj(), -self.alpha.T]])

    @classmethod
    def from_matrix(cls, m) -> SpAlgebraElement:
        m = np.asarray(m, complex)
        n = m.shape[0] // 2
        return cls(m[:n, :n], m[:n, n:], m[n:, :n].conj())

    def bracket(self, other: SpAlgebraElement) -> SpAlgebraElement:
        x, y = self.matrix(), other.matrix()
        return SpAlgebraElement.from_matrix(x @ y - y @ x)

    def to_json(self) -> dict:
        def enc(m):
            return [[[float(v.real), float(v.imag)] for v in row] for row in m]
        return {"alpha": enc(self.alpha), "beta": enc(self.beta), "gamma": enc(self.gamma)}

    @classmethod
    def from_json(cls, obj) -> SpAlgebraElement:
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            def dec(rows):
                return np.array([[complex(re, im) for re, im in row] for row in rows])
            return cls(dec(obj["alpha"]), dec(obj["beta"]), dec(obj["gamma"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed symplectic algebra JSON: {exc}") from exc


def derivation_op(config: FockConfig, alpha) -> FockOperator:
    """``D_alpha = sum alpha_mn a_m^* a_n``."""
    return _quadratic(config, alpha, creation, annihilation, (0, 0))


def mult_quadratic(config: FockConfig, beta) -> FockOperator:
    """``M_beta = sum beta_mn a_m^* a_n^*``: multiplication by ``sum beta_mn x_m x_n``."""
    return _quadratic(config, beta, creation, creation, (2, 2))


def mult_quadratic_adjoint(config: FockConfig, gamma) -> FockOperator:
    """``M_gamma^* = sum conj(gamma_mn) a_m a_n``."""
    return _quadratic(config, np.conj(gamma), annihilation, annihilation, (-2, -2))


def symplectic_rep(config: FockConfig, X: SpAlgebraElement) -> FockOperator:
    """``rho(X) = D_alpha + M_beta / 2 - M_gamma^* / 2``.

    The minus sign on the annihilation part is what makes ``rho`` close on
    brackets of the block matrices up to the scalar
    ``tr(conj(gamma_2) beta_1 - conj(gamma_1) beta_2) / 2``, and makes
    ``rho`` skew-adjoint on the real form (``gamma = beta``,
    ``alpha`` skew-Hermitian).
    """
    if X.n != config.n_modes:
        raise ValueError("algebra element size does not match the number of modes")
    return (derivation_op(config, X.alpha)
            + mult_quadratic(config, X.beta).scale(0.5)
            - mult_quadratic_adjoint(config, X.gamma).scale(0.5))


@dataclass(frozen=True)
class CocycleResult:
    operator_scalar: complex
    closed_form: complex
    residual: float


def cocycle_closed_form(X1: SpAlgebraElement, X2: SpAlgebraElement) -> complex:
    return complex(0.5 * np.trace(X2.gamma.conj() @ X1.beta - X1.gamma.conj() @ X2.beta))


def cocycle_defect(config: FockConfig, X1: SpAlgebraElement, X2: SpAlgebraElement,
                   tol: float = 1e-9) -> CocycleResult:
    """Scalar by which ``[rho(X1), rho(X2)] - rho([X1, X2])`` acts on states of
    degree ``<= D - 4``."""
    if config.max_degree < 6:
        raise ValueError("cocycle check needs degree cutoff >= 6")
    r1, r2 = symplectic_rep(config, X1), symplectic_rep(config, X2)
    defect = commutator(r1, r2) - symplectic_rep(config, X1.bracket(X2))
    d = config.max_degree - 4
    block = defect.on_interior(d)
    cols = defect.interior_columns(d)
    scalar = complex(np.mean(block[cols, np.arange(cols.size)]))
    eye = np.zeros_like(block)
    eye[cols, np.arange(cols.size)] = 1.0
    residual = float(np.max(np.abs(block - scalar * eye)))
    if residual > tol:
        raise RuntimeError(f"cocycle defect is not scalar on the interior (residual {residual:.2e})")
    return CocycleResult(scalar, cocycle_closed_form(X1, X2), residual)


# second quantization ---------------------------------------------------------


def second_quantize(config: FockConfig, X) -> FockOperator:
    """Leibniz extension: on ``x^K`` replace one factor ``x_n`` at a time by its
    image ``sum_m X_mn x_m``."""
    X = np.asarray(X, complex)
    if X.shape != (config.n_modes, config.n_modes):
        raise ValueError(f"one-particle operator must be {config.n_modes}x{config.n_modes}")
    basis = config.basis
    rows, cols, vals = [], [], []
    for j, K in enumerate(basis.indices):
        for n in range(config.n_modes):
            if K[n] == 0:
                continue
            for m in range(config.n_modes):
                if X[m, n] == 0:
                    continue
                L = list(K)
                L[n] -= 1
                L[m] += 1
                # k_n x^{K-e_n+e_m}, rewritten in the normalized basis
                coef = K[n] * np.sqrt(_fact_ratio(L, K))
                rows.append(basis.lookup[tuple(L)])
                cols.append(j)
                vals.append(X[m, n] * coef)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(config.dim, config.dim), dtype=complex)
    return FockOperator(config, mat, (0, 0))


def _fact_ratio(L, K) -> float:
    # prod L! / prod K! for multi-indices differing by moving one unit
    r = 1.0
    for lj, kj in zip(L, K):
        if lj > kj:
            for v in range(kj + 1, lj + 1):
                r *= v
        elif kj > lj:
            for v in range(lj + 1, kj + 1):
                r /= v
    return r


@dataclass(frozen=True)
class DerivationGenerators:
    """Second-quantized generators attached to a list of circle maps."""

    labels: tuple
    one_particle: tuple
    operators: tuple
    dq_plus_norms: tuple
    bracket_defect: float


def map_generators(config: FockConfig, maps, grid: int = 1024) -> DerivationGenerators:
    """``dGamma`` of the ``W+ -> W+`` block of ``delta h`` for each map.

    The block is taken in the orthonormal basis ``z^n / sqrt(n)``.  The block
    of ``d^q h = [S, delta h]`` itself vanishes since ``S`` is constant on
    ``W+``; its norm is returned alongside as a check.  ``bracket_defect`` is
    the largest interior violation of ``dGamma([X, Y]) = [dGamma X, dGamma Y]``
    over all pairs.
    """
    from .qcalc import compress_plus, finite_difference_matrix, map_quantum_differential
    from .composition import OneParticleOperator
    from .fourier import ModeSpec

    n = config.n_modes
    spec = ModeSpec(n, True)
    labels, ones, ops, dq = [], [], [], []
    for h in maps:
        delta = finite_difference_matrix(h, spec, grid)
        x = compress_plus(OneParticleOperator(spec, delta.sobolev_matrix()))
        labels.append(h.kind)
        ones.append(x)
        ops.append(second_quantize(config, x))
        dq.append(float(np.linalg.norm(compress_plus(map_quantum_differential(h, n, grid)))))
    worst = 0.0
    d = config.max_degree - 2
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            lhs = second_quantize(config, ones[i] @ ones[j] - ones[j] @ ones[i])
            rhs = commutator(ops[i], ops[j])
            worst = max(worst, float(np.max(np.abs((lhs - rhs).on_interior(d)), initial=0.0)))
    return DerivationGenerators(tuple(labels), tuple(ones), tuple(ops), tuple(dq), worst)

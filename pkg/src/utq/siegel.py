"""Truncated Siegel disc and the fractional-linear action of Sp(V).

Blocks are written in Sobolev-orthonormal coordinates ``z^k / sqrt|k|`` on
``W+`` and the conjugate coordinates on ``W-``, so a symplectic operator is
``[[a, b], [conj(b), conj(a)]]`` with

    a^* a - b^T conj(b) = I,    a^* b = b^T conj(a).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SYM_TOL = 1e-8
COND_LIMIT = 1e12


class SiegelError(ValueError):
    pass


def _square(z) -> np.ndarray:
    z = np.asarray(z, complex)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise SiegelError(f"expected a square matrix, got shape {z.shape}")
    return z


def symmetry_defect(z) -> float:
    z = _square(z)
    return float(np.linalg.norm(z - z.T)) if z.size else 0.0


@dataclass(frozen=True, eq=False)
class SiegelPoint:
    """Symmetric ``n x n`` matrix ``Z`` (asymmetry above ``SYM_TOL`` is rejected,
    below it is removed)."""

    z: np.ndarray

    def __post_init__(self):
        z = _square(self.z)
        d = symmetry_defect(z)
        if d > SYM_TOL:
            raise SiegelError(f"Siegel point is not symmetric (defect {d:.2e})")
        z = 0.5 * (z + z.T)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @classmethod
    def zero(cls, n: int) -> SiegelPoint:
        return cls(np.zeros((n, n), complex))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, norm: float = 0.3) -> SiegelPoint:
        """Random symmetric matrix with spectral norm exactly ``norm``."""
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        z = g + g.T
        return cls(norm * z / np.linalg.norm(z, 2))

    def to_json(self) -> dict:
        return {"n": self.n, "z": [[float(c.real), float(c.imag)] for c in self.z.ravel()]}

    @classmethod
    def from_json(cls, obj) -> SiegelPoint:
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            n = int(obj["n"])
            vals = np.array([complex(re, im) for re, im in obj["z"]])
            return cls(vals.reshape(n, n))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SiegelError):
                raise
            raise ValueError(f"malformed SiegelPoint JSON: {exc}") from exc


@dataclass(frozen=True)
class DiscCheck:
    ok: bool
    min_eig: float
    symmetry_defect: float


def in_disc(z) -> DiscCheck:
    """Membership test ``Z = Z^T`` and ``I - conj(Z) Z > 0``."""
    if isinstance(z, SiegelPoint):
        z = z.z
    z = _square(z)
    d = symmetry_defect(z)
    zs = 0.5 * (z + z.T)
    h = np.eye(z.shape[0]) - zs.conj() @ zs
    h = 0.5 * (h + h.conj().T)
    min_eig = float(np.linalg.eigvalsh(h).min()) if z.size else 1.0
    return DiscCheck(d <= 1e-10 and min_eig > 0, min_eig, d)


@dataclass(frozen=True, eq=False)
class SymplecticElement:
    """Operator ``[[a, b], [conj(b), conj(a)]]`` on ``W+ (+) W-``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a, b = _square(self.a), _square(self.b)
        if a.shape != b.shape:
            raise SiegelError(f"block shapes differ: {a.shape} vs {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def identity(cls, n: int) -> SymplecticElement:
        return cls(np.eye(n, dtype=complex), np.zeros((n, n), complex))

    @classmethod
    def from_matrix(cls, m) -> SymplecticElement:
        m = _square(m)
        n = m.shape[0] // 2
        return cls(m[:n, :n], m[:n, n:])

    def matrix(self) -> np.ndarray:
        return np.block([[self.a, self.b], [self.b.conj(), self.a.conj()]])

    def __matmul__(self, other: SymplecticElement) -> SymplecticElement:
        a = self.a @ other.a + self.b @ other.b.conj()
        b = self.a @ other.b + self.b @ other.a.conj()
        return SymplecticElement(a, b)

    def inverse(self) -> SymplecticElement:
        # the inverse of a symplectic block matrix is [[a^*, -b^T], [-b^*, a^T]]
        return SymplecticElement(self.a.conj().T, -self.b.T)

    def relation_defects(self, band: int | None = None) -> tuple[float, float]:
        """Frobenius defects of ``a^* a - b^T conj(b) - I`` and ``a^* b - b^T conj(a)``,
        optionally restricted to the leading ``band x band`` block."""
        a, b = self.a, self.b
        r1 = a.conj().T @ a - b.T @ b.conj() - np.eye(self.n)
        r2 = a.conj().T @ b - b.T @ a.conj()
        if band is not None:
            r1, r2 = r1[:band, :band], r2[:band, :band]
        return float(np.linalg.norm(r1)), float(np.linalg.norm(r2))


def act(A: SymplecticElement, Z: SiegelPoint) -> SiegelPoint:
    """Fractional-linear action ``Z -> (conj(a) Z + conj(b)) (b Z + a)^{-1}``."""
    if A.n != Z.n:
        raise SiegelError(f"dimension mismatch: element {A.n}, point {Z.n}")
    den = A.b @ Z.z + A.a
    if np.linalg.cond(den) > COND_LIMIT:
        raise SiegelError("b Z + a is singular")
    num = A.a.conj() @ Z.z + A.b.conj()
    return SiegelPoint(np.linalg.solve(den.T, num.T).T)


def stabilizer_check(A: SymplecticElement, tol: float = 1e-10) -> bool:
    """True iff ``A`` lies in the isotropy group of 0 (``b = 0``); in that case
    ``act(A, 0) = 0`` is verified as well."""
    if np.linalg.norm(A.b) >= tol:
        return False
    image = act(A, SiegelPoint.zero(A.n))
    if np.linalg.norm(image.z) >= tol:
        raise SiegelError("element with b = 0 moved the origin")
    return True


def expm_taylor(x, tol: float = 1e-14) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a truncated Taylor series."""
    x = _square(x)
    norm = np.linalg.norm(x, 1)
    s = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0 else 0
    y = x / 2.0 ** s
    out = np.eye(x.shape[0], dtype=complex)
    term = out.copy()
    for j in range(1, 60):
        term = term @ y / j
        out = out + term
        if np.linalg.norm(term, 1) <= tol * np.linalg.norm(out, 1):
            break
    for _ in range(s):
        out = out @ out
    return out


def random_algebra_element(n: int, rng: np.random.Generator, band: int | None = None,
                           strength: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Random ``(alpha, beta)``: skew-Hermitian ``alpha``, symmetric ``beta``,
    supported in the leading ``band x band`` block."""
    band = n if band is None else band
    if band > n:
        raise SiegelError(f"band {band} exceeds dimension {n}")
    g = rng.standard_normal((band, band)) + 1j * rng.standard_normal((band, band))
    h = rng.standard_normal((band, band)) + 1j * rng.standard_normal((band, band))
    alpha = np.zeros((n, n), complex)
    beta = np.zeros((n, n), complex)
    alpha[:band, :band] = 0.5 * (g - g.conj().T)
    beta[:band, :band] = 0.5 * (h + h.T)
    return strength * alpha, strength * beta


def random_symplectic(n: int, seed: int = 0, band: int | None = None,
                      strength: float = 0.3) -> SymplecticElement:
    """Exponential of a random element of the symplectic Lie algebra."""
    alpha, beta = random_algebra_element(n, np.random.default_rng(seed), band, strength)
    x = np.block([[alpha, beta], [beta.conj(), alpha.conj()]])
    return SymplecticElement.from_matrix(expm_taylor(x))


def read_block_csv(path) -> np.ndarray:
    """Read a complex matrix from ``row,col,re,im`` CSV lines."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("row"):
                continue
            r, c, re, im = line.split(",")
            rows.append((int(r), int(c), float(re), float(im)))
    if not rows:
        raise ValueError(f"{path}: no matrix entries")
    n = max(max(r, c) for r, c, _, _ in rows) + 1
    m = np.zeros((n, n), complex)
    for r, c, re, im in rows:
        m[r, c] = complex(re, im)
    return m


def write_block_csv(path, m) -> None:
    m = np.asarray(m, complex)
    with open(path, "w") as fh:
        fh.write("row,col,re,im\n")
        for (r, c), v in np.ndenumerate(m):
            fh.write(f"{r},{c},{float(v.real)!r},{float(v.imag)!r}\n")

"""The pullback operator ``T_h xi = xi o h - mean`` on truncated loop space."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circle_maps import CircleMap
from .fourier import FourierLoop, ModeSpec, symplectic_form
from .siegel import COND_LIMIT, SiegelError, SiegelPoint, SymplecticElement, symmetry_defect


@dataclass(frozen=True, eq=False)
class OneParticleOperator:
    """Dense matrix acting on coefficient vectors of a :class:`ModeSpec`.

    Rows and columns are ordered like ``spec.modes``.
    """

    spec: ModeSpec
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, complex)
        if m.shape != (self.spec.size, self.spec.size):
            raise ValueError(f"matrix shape {m.shape} does not match {self.spec}")
        object.__setattr__(self, "matrix", m)

    def apply(self, f: FourierLoop) -> FourierLoop:
        if f.spec != self.spec:
            raise ValueError("loop and operator live on different mode sets")
        out = self.matrix @ f.coeffs
        if f.real and self.respects_reality():
            # clean rounding so the output passes the reality check
            out = 0.5 * (out + out[::-1].conj())
            return FourierLoop(self.spec, out, True)
        return FourierLoop(self.spec, out, False)

    def respects_reality(self, tol: float = 1e-9) -> bool:
        """``T[-m, -k] = conj(T[m, k])``: maps real loops to real loops."""
        m = self.matrix
        return bool(np.max(np.abs(m[::-1, ::-1] - m.conj()), initial=0.0)
                    <= tol * max(1.0, np.abs(m).max(initial=0.0)))

    def __matmul__(self, other: OneParticleOperator) -> OneParticleOperator:
        if other.spec != self.spec:
            raise ValueError("operator mode sets differ")
        return OneParticleOperator(self.spec, self.matrix @ other.matrix,
                                   f"{self.label}*{other.label}")

    def sobolev_matrix(self) -> np.ndarray:
        """Matrix in the orthonormal basis ``z^k / sqrt|k|`` (zero mode unweighted)."""
        w = np.sqrt(np.maximum(self.spec.weights(), 1.0))
        return w[:, None] * self.matrix / w[None, :]

    def save(self, out_dir, meta: dict | None = None) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        modes = self.spec.modes
        with open(out / "matrix.csv", "w") as fh:
            fh.write("row,col,re,im\n")
            for (i, j), v in np.ndenumerate(self.matrix):
                if v != 0:
                    fh.write(f"{modes[i]},{modes[j]},{float(v.real)!r},{float(v.imag)!r}\n")
        info = {"label": self.label, "N": self.spec.n, "include_zero": self.spec.include_zero,
                "index": "Fourier mode numbers", "entry": "T[row, col]"}
        info.update(meta or {})
        (out / "matrix.json").write_text(json.dumps(info, indent=2, sort_keys=True))

    @classmethod
    def load(cls, in_dir) -> OneParticleOperator:
        in_dir = Path(in_dir)
        info = json.loads((in_dir / "matrix.json").read_text())
        spec = ModeSpec(int(info["N"]), bool(info.get("include_zero", False)))
        m = np.zeros((spec.size, spec.size), complex)
        with open(in_dir / "matrix.csv") as fh:
            next(fh)
            for line in fh:
                r, c, re, im = line.strip().split(",")
                m[spec.index(int(r)), spec.index(int(c))] = complex(float(re), float(im))
        return cls(spec, m, info.get("label", ""))


def identity_operator(spec: ModeSpec) -> OneParticleOperator:
    return OneParticleOperator(spec, np.eye(spec.size, dtype=complex), "I")


def build_Th(h: CircleMap, spec: ModeSpec, grid: int = 4096) -> OneParticleOperator:
    """Matrix of ``T_h`` on the modes of ``spec``.

    Column ``k`` holds the Fourier coefficients of ``theta -> e^{i k h(theta)}``
    computed by FFT on ``grid`` points, with the mean removed.
    """
    n = spec.n
    if grid < 4 * n:
        raise ValueError(f"grid {grid} < 4N = {4 * n}: Fourier coefficients would alias")
    theta = 2 * np.pi * np.arange(grid) / grid
    hv = h.lift(theta)
    k = np.arange(1, n + 1)
    coeffs = np.fft.fft(np.exp(1j * np.multiply.outer(hv, k)), axis=0) / grid
    m = np.arange(-n, n + 1)
    pos = coeffs[np.mod(m, grid)]             # rows m = -n..n, columns k = 1..n
    full = np.zeros((2 * n + 1, 2 * n + 1), complex)
    full[:, n + 1:] = pos
    full[:, :n] = pos[::-1, ::-1].conj()      # T[m, -k] = conj(T[-m, k])
    full[n, :] = 0.0                           # mean removed
    full[n, n] = 1.0                           # constants are fixed
    keep = spec.modes + n
    return OneParticleOperator(spec, full[np.ix_(keep, keep)], f"T[{h.kind}]")


def _random_band_loop(spec: ModeSpec, band: int, rng) -> FourierLoop:
    vals = {k: rng.standard_normal() + 1j * rng.standard_normal() for k in range(1, band + 1)}
    return FourierLoop.from_modes(spec, vals, real=True)


def check_symplectic(T: OneParticleOperator, trials: int = 20, band: int | None = None,
                     seed: int = 0) -> float:
    """Max of ``|omega(T xi, T eta) - omega(xi, eta)|`` over random real pairs
    supported on ``|k| <= band``."""
    n = T.spec.n
    band = max(1, n // 4) if band is None else band
    if band > max(1, n // 4):
        raise ValueError(f"test band {band} exceeds N/4 = {n // 4}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        xi, eta = _random_band_loop(T.spec, band, rng), _random_band_loop(T.spec, band, rng)
        tx = FourierLoop(T.spec, T.matrix @ xi.coeffs)
        ty = FourierLoop(T.spec, T.matrix @ eta.coeffs)
        defect = abs(symplectic_form(tx, ty) - symplectic_form(xi, eta))
        worst = max(worst, defect)
    return worst


@dataclass
class NormCheck:
    norm_est: float
    bound: float
    dilatation: float

    @property
    def passed(self) -> bool:
        return self.norm_est <= self.bound + 1e-6


def operator_norm_bound_check(h: CircleMap, T: OneParticleOperator,
                              band: int | None = None) -> NormCheck:
    """Sobolev operator norm of ``T`` on loops with ``|k| <= band`` (default
    ``N/2``) against the quasiconformal bound ``sqrt(K + 1/K)``."""
    K = h.dilatation_hint
    if K is None:
        raise ValueError("map carries no dilatation hint K")
    band = T.spec.n // 2 if band is None else band
    cols = np.flatnonzero((np.abs(T.spec.modes) <= band) & (T.spec.modes != 0))
    rows = np.flatnonzero(T.spec.modes != 0)
    s = np.linalg.svd(T.sobolev_matrix()[np.ix_(rows, cols)], compute_uv=False)
    return NormCheck(float(s[0]), float(np.sqrt(K + 1.0 / K)), float(K))


def blocks(T: OneParticleOperator) -> SymplecticElement:
    """``a`` (W+ -> W+) and ``b`` (W- -> W+) in Sobolev-orthonormal coordinates,
    with ``W-`` indexed by ``|k|`` through conjugation."""
    n = T.spec.n
    tw = T.sobolev_matrix()
    modes = T.spec.modes
    plus = np.array([np.flatnonzero(modes == k)[0] for k in range(1, n + 1)])
    minus = np.array([np.flatnonzero(modes == -k)[0] for k in range(1, n + 1)])
    return SymplecticElement(tw[np.ix_(plus, plus)], tw[np.ix_(plus, minus)])


def siegel_point(T: OneParticleOperator) -> tuple[SiegelPoint, float]:
    """Image of the origin, ``Z = conj(b) a^{-1}``, and its raw asymmetry."""
    A = blocks(T)
    if np.linalg.cond(A.a) > COND_LIMIT:
        raise SiegelError("block a is singular: map too far from Mobius at this truncation")
    z = np.linalg.solve(A.a.T, A.b.conj().T).T
    d = symmetry_defect(z)
    return SiegelPoint(0.5 * (z + z.T)), d


def hs_norm_b(T: OneParticleOperator) -> float:
    return float(np.linalg.norm(blocks(T).b))


def shale_table(h: CircleMap, modes_list, grid: int = 4096) -> list[dict]:
    """Rows ``(N, ||b||_F, difference from previous row)`` for increasing ``N``."""
    modes_list = list(modes_list)
    if any(b <= a for a, b in zip(modes_list, modes_list[1:])):
        raise ValueError("modes list must be strictly increasing")
    rows, prev = [], None
    for n in modes_list:
        g = max(grid, 4 * n)
        norm = hs_norm_b(build_Th(h, ModeSpec(n), g))
        rows.append({"N": n, "hs_b": norm, "diff": None if prev is None else norm - prev})
        prev = norm
    return rows


def count_nonconvergent_steps(rows: list[dict], floor: float = 1e-13) -> int:
    """Number of consecutive differences in a :func:`shale_table` that fail to
    shrink.  A difference at or below ``floor * max(1, ||b||)`` counts as
    converged, so a table already exact to rounding passes."""
    diffs = [abs(r["diff"]) for r in rows[1:]]
    scale = max(1.0, max((r["hs_b"] for r in rows), default=0.0))
    return sum(1 for x, y in zip(diffs, diffs[1:]) if not (y < x or y <= floor * scale))

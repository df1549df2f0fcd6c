"""Truncated Fourier model of the half-differentiable loop space.

A loop ``f(e^{i theta}) = sum_k f_k e^{i k theta}`` is stored densely over the
mode indices ``-N..N``.  The zero slot is present only when the mode set
includes constants (needed for operators acting on all of L^2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

ATOL = 1e-12


@dataclass(frozen=True)
class ModeSpec:
    """Index set ``0 < |k| <= n`` (plus ``k = 0`` if ``include_zero``)."""

    n: int
    include_zero: bool = False

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.n}")

    @property
    def modes(self) -> np.ndarray:
        k = np.arange(-self.n, self.n + 1)
        return k if self.include_zero else k[k != 0]

    @property
    def size(self) -> int:
        return 2 * self.n + (1 if self.include_zero else 0)

    def index(self, k: int) -> int:
        if k == 0 and not self.include_zero:
            raise KeyError("mode 0 is not carried")
        if abs(k) > self.n:
            raise KeyError(f"mode {k} outside cutoff {self.n}")
        i = k + self.n
        if not self.include_zero and k > 0:
            i -= 1
        return i

    def weights(self) -> np.ndarray:
        """Sobolev weights ``|k|`` aligned with :attr:`modes`."""
        return np.abs(self.modes).astype(float)


@dataclass(frozen=True)
class Polarization:
    """Splitting of the nonzero modes into ``W+`` (k > 0) and ``W-`` (k < 0)."""

    spec: ModeSpec

    @property
    def plus_indices(self) -> np.ndarray:
        return np.flatnonzero(self.spec.modes > 0)

    @property
    def minus_indices(self) -> np.ndarray:
        return np.flatnonzero(self.spec.modes < 0)


@dataclass(frozen=True, eq=False)
class FourierLoop:
    """Coefficient vector of a loop over a :class:`ModeSpec`.

    If ``real`` is set the coefficients satisfy ``f_{-k} = conj(f_k)``.
    """

    spec: ModeSpec
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.spec.size,):
            raise ValueError(f"expected {self.spec.size} coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.real:
            defect = np.max(np.abs(c - c[::-1].conj())) if c.size else 0.0
            if defect > 1e-9 * max(1.0, np.max(np.abs(c))):
                raise ValueError(f"coefficients violate f_-k = conj(f_k) (defect {defect:.2e})")

    # construction -------------------------------------------------------

    @classmethod
    def zeros(cls, spec: ModeSpec, real: bool = True) -> FourierLoop:
        return cls(spec, np.zeros(spec.size, complex), real)

    @classmethod
    def from_modes(cls, spec: ModeSpec, values: dict, real: bool = False) -> FourierLoop:
        """Build from ``{k: f_k}``.  With ``real=True`` only ``k > 0`` (and 0)
        need be given; the negative modes are completed by conjugation."""
        c = np.zeros(spec.size, complex)
        for k, v in values.items():
            c[spec.index(int(k))] = v
            if real and k != 0:
                c[spec.index(-int(k))] = np.conj(v)
        return cls(spec, c, real)

    @classmethod
    def random(cls, spec: ModeSpec, rng: np.random.Generator, band: int | None = None,
               real: bool = True, decay: float = 0.0) -> FourierLoop:
        """Random loop supported on ``|k| <= band``; ``decay`` damps mode k by ``k**-decay``."""
        band = spec.n if band is None else min(band, spec.n)
        vals = {}
        for k in range(1, band + 1):
            vals[k] = (rng.standard_normal() + 1j * rng.standard_normal()) * k ** -decay
            if not real:
                vals[-k] = (rng.standard_normal() + 1j * rng.standard_normal()) * k ** -decay
        return cls.from_modes(spec, vals, real=real)

    def coeff(self, k: int) -> complex:
        try:
            return complex(self.coeffs[self.spec.index(k)])
        except KeyError:
            return 0.0j

    def _same(self, other: FourierLoop) -> None:
        if self.spec != other.spec:
            raise ValueError(f"mode specs differ: {self.spec} vs {other.spec}")

    def __add__(self, other: FourierLoop) -> FourierLoop:
        self._same(other)
        return FourierLoop(self.spec, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other: FourierLoop) -> FourierLoop:
        self._same(other)
        return FourierLoop(self.spec, self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self) -> FourierLoop:
        return FourierLoop(self.spec, -self.coeffs, self.real)

    def scale(self, c: complex) -> FourierLoop:
        real = self.real and np.isreal(c)
        return FourierLoop(self.spec, c * self.coeffs, bool(real))

    def allclose(self, other: FourierLoop, atol: float = ATOL) -> bool:
        self._same(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))

    def evaluate(self, theta) -> np.ndarray:
        """Values ``sum_k f_k e^{i k theta}`` at the given angles."""
        theta = np.asarray(theta, float)
        vals = np.exp(1j * np.multiply.outer(theta, self.spec.modes)) @ self.coeffs
        return vals.real if self.real else vals

    def derivative(self, theta) -> np.ndarray:
        theta = np.asarray(theta, float)
        k = self.spec.modes
        vals = np.exp(1j * np.multiply.outer(theta, k)) @ (1j * k * self.coeffs)
        return vals.real if self.real else vals

    def resized(self, spec: ModeSpec) -> FourierLoop:
        """Zero-pad or truncate onto another mode set."""
        c = np.zeros(spec.size, complex)
        for i, k in enumerate(spec.modes):
            c[i] = self.coeff(int(k))
        return FourierLoop(spec, c, self.real)

    # serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "N": self.spec.n,
            "real": self.real,
            "include_zero": self.spec.include_zero,
            "coeffs": [[int(k), float(c.real), float(c.imag)]
                       for k, c in zip(self.spec.modes, self.coeffs) if c != 0],
        }

    @classmethod
    def from_json(cls, obj) -> FourierLoop:
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            spec = ModeSpec(int(obj["N"]), bool(obj.get("include_zero", False)))
            c = np.zeros(spec.size, complex)
            for k, re, im in obj["coeffs"]:
                c[spec.index(int(k))] = complex(re, im)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed FourierLoop JSON: {exc}") from exc
        return cls(spec, c, bool(obj.get("real", False)))


def h_half_norm(f: FourierLoop) -> float:
    """Sobolev norm of order 1/2, ``sqrt(sum_{k != 0} |k| |f_k|^2)``."""
    return float(np.sqrt(np.sum(f.spec.weights() * np.abs(f.coeffs) ** 2)))


def _positive_sum(xi: FourierLoop, eta: FourierLoop) -> complex:
    xi._same(eta)
    pos = xi.spec.modes > 0
    k = xi.spec.modes[pos]
    return complex(np.sum(k * xi.coeffs[pos] * np.conj(eta.coeffs[pos])))


def symplectic_form(xi: FourierLoop, eta: FourierLoop) -> float:
    """``omega(xi, eta) = 2 Im sum_{k>0} k xi_k conj(eta_k)`` for real loops."""
    return 2.0 * _positive_sum(xi, eta).imag


def symplectic_form_c(xi: FourierLoop, eta: FourierLoop) -> complex:
    """Complex-bilinear extension of the symplectic form to ``V^C``.

    On real loops this agrees with :func:`symplectic_form`.
    """
    xi._same(eta)
    k = xi.spec.modes
    pos, neg = k > 0, k < 0
    # modes are symmetric, so reversal sends slot k to slot -k
    e = eta.coeffs[::-1]
    s = np.sum(k[pos] * xi.coeffs[pos] * e[pos]) - np.sum(np.abs(k[neg]) * xi.coeffs[neg] * e[neg])
    return complex(-1j * s)


def kahler_metric(xi: FourierLoop, eta: FourierLoop) -> float:
    """``g(xi, eta) = 2 Re sum_{k>0} k xi_k conj(eta_k)``."""
    return 2.0 * _positive_sum(xi, eta).real


def hermitian_product(xi: FourierLoop, eta: FourierLoop) -> complex:
    """``<xi, eta> = sum_{k != 0} |k| xi_k conj(eta_k)``, antilinear in ``eta``."""
    xi._same(eta)
    return complex(np.sum(xi.spec.weights() * xi.coeffs * np.conj(eta.coeffs)))


def apply_J0(f: FourierLoop) -> FourierLoop:
    """Reference complex structure: ``-i`` on positive modes, ``+i`` on negative."""
    k = f.spec.modes
    factor = np.where(k > 0, -1j, np.where(k < 0, 1j, 0.0))
    return FourierLoop(f.spec, factor * f.coeffs, f.real)


def split_W(f: FourierLoop) -> tuple[FourierLoop, FourierLoop]:
    """Project onto ``W+`` (positive modes) and ``W-`` (negative modes)."""
    k = f.spec.modes
    plus = FourierLoop(f.spec, np.where(k > 0, f.coeffs, 0), False)
    minus = FourierLoop(f.spec, np.where(k < 0, f.coeffs, 0), False)
    return plus, minus

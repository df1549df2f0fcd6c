"""Orientation-preserving circle homeomorphisms and the cross-ratio test.

Every map is represented by its lift ``theta -> h(theta)``: a strictly
increasing function with ``h(theta + 2 pi) = h(theta) + 2 pi``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .fourier import FourierLoop

TWO_PI = 2.0 * np.pi
DEFAULT_GRID = 4096
RK4_STEPS_PER_UNIT = 1024


class CircleMap:
    """Base class: subclasses implement :meth:`lift` on arrays of angles."""

    kind = "abstract"
    dilatation_hint: float | None = None

    def lift(self, theta) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, theta) -> np.ndarray:
        """Image angle in ``[0, 2 pi)``."""
        return np.mod(self.lift(theta), TWO_PI)

    def on_circle(self, z) -> np.ndarray:
        """Action on unit complex numbers."""
        return np.exp(1j * self.lift(np.angle(z)))

    def grid_values(self, m: int = DEFAULT_GRID) -> tuple[np.ndarray, np.ndarray]:
        theta = TWO_PI * np.arange(m) / m
        return theta, self.lift(theta)

    def is_monotone(self, m: int = DEFAULT_GRID) -> bool:
        theta = TWO_PI * np.arange(m + 1) / m
        vals = self.lift(theta)
        return bool(np.all(np.diff(vals) > 0) and abs(vals[-1] - vals[0] - TWO_PI) < 1e-9)

    def to_json(self) -> dict:
        raise NotImplementedError

    def __matmul__(self, other: CircleMap) -> CircleMap:
        return compose(self, other)


@dataclass(eq=False)
class Mobius(CircleMap):
    """Boundary action of ``z -> e^{i angle} (z - a) / (1 - conj(a) z)``."""

    a: complex = 0.0
    angle: float = 0.0
    kind = "mobius"
    dilatation_hint: float | None = 1.0

    def __post_init__(self):
        self.a = complex(self.a)
        if abs(self.a) >= 1:
            raise ValueError(f"Mobius parameter must satisfy |a| < 1, got {abs(self.a)}")

    def lift(self, theta):
        theta = np.asarray(theta, float)
        # arg((z - a)/(1 - conj(a) z)) = theta - 2 arg(1 - conj(a) e^{i theta}), branch-free for |a| < 1
        return self.angle + theta - 2.0 * np.angle(1.0 - np.conj(self.a) * np.exp(1j * theta))

    def apply(self, z):
        z = np.asarray(z, complex)
        return np.exp(1j * self.angle) * (z - self.a) / (1.0 - np.conj(self.a) * z)

    def to_json(self):
        return {"kind": "mobius", "a": [self.a.real, self.a.imag], "angle": self.angle}


@dataclass(eq=False)
class FlowDiffeo(CircleMap):
    """Time-``t`` flow of the vector field ``d theta / dt = v(theta)``, fixed-step RK4."""

    v: FourierLoop
    t: float = 1.0
    steps: int | None = None
    kind = "flow"

    def __post_init__(self):
        if not self.v.real:
            raise ValueError("flow vector field must be a real loop")
        if self.steps is None:
            self.steps = max(1, int(np.ceil(RK4_STEPS_PER_UNIT * abs(self.t))))
        pos = self.v.spec.modes > 0
        self._k = self.v.spec.modes[pos]
        self._c = self.v.coeffs[pos]
        self._c0 = self.v.coeff(0).real

    def _series(self, x, coeffs):
        # 2 Re sum_{k>0} c_k e^{ikx} by the angle-addition recurrence
        e1 = np.exp(1j * x)
        ek = e1.copy()
        out = np.zeros_like(x)
        for c in coeffs:
            out += (c * ek).real
            ek *= e1
        return 2.0 * out

    def _field(self, x):
        return self._c0 + self._series(x, self._c)

    def _field_derivative(self, x):
        return self._series(x, 1j * self._k * self._c)

    def lift(self, theta):
        x = np.array(theta, dtype=float)
        if self.t == 0 or not np.any(self._c):
            return x
        dt = self.t / self.steps
        for _ in range(self.steps):
            k1 = self._field(x)
            k2 = self._field(x + 0.5 * dt * k1)
            k3 = self._field(x + 0.5 * dt * k2)
            k4 = self._field(x + dt * k3)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    @property
    def dilatation_hint(self) -> float:
        """Derivative-ratio estimate ``max h' / min h'`` from the variational equation."""
        theta = TWO_PI * np.arange(1024) / 1024
        log_d = np.zeros_like(theta)
        x = theta.copy()
        dt = self.t / self.steps
        for _ in range(self.steps):
            # log h' grows at rate v'(x); integrate jointly with the same RK4 stages
            k1 = self._field(x)
            l1 = self._field_derivative(x)
            x2 = x + 0.5 * dt * k1
            k2 = self._field(x2)
            l2 = self._field_derivative(x2)
            x3 = x + 0.5 * dt * k2
            k3 = self._field(x3)
            l3 = self._field_derivative(x3)
            x4 = x + dt * k3
            k4 = self._field(x4)
            l4 = self._field_derivative(x4)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            log_d = log_d + dt / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
        return float(np.exp(log_d.max() - log_d.min()))

    def to_json(self):
        return {"kind": "flow", "v": self.v.to_json(), "t": self.t, "steps": self.steps}


@dataclass(eq=False)
class ZigzagQS(CircleMap):
    """Piecewise-linear lift with slopes alternating in ratio ``s : 1/s``.

    The breakpoints split ``[0, 2 pi)`` into an even number of pieces; the
    slopes are rescaled so the total increment is ``2 pi``.  Quasisymmetric,
    not differentiable at the breakpoints.
    """

    s: float = 2.0
    breakpoints: list = field(default_factory=lambda: [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    kind = "zigzag"

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError(f"zigzag slope parameter must be positive, got {self.s}")
        b = np.sort(np.mod(np.asarray(self.breakpoints, float), TWO_PI))
        if b.size == 0 or b[0] != 0.0:
            b = np.concatenate([[0.0], b])
        if np.any(np.diff(b) <= 0):
            raise ValueError("zigzag breakpoints must be distinct")
        self.breakpoints = list(b)
        self._knots = np.concatenate([b, [TWO_PI]])
        slopes = np.where(np.arange(b.size) % 2 == 0, self.s, 1.0 / self.s)
        incr = np.diff(self._knots) * slopes
        scale = TWO_PI / incr.sum()
        self._slopes = slopes * scale
        self._vals = np.concatenate([[0.0], np.cumsum(incr * scale)])

    @property
    def dilatation_hint(self) -> float:
        return float(self.s ** 2)

    def lift(self, theta):
        theta = np.asarray(theta, float)
        turns = np.floor(theta / TWO_PI)
        x = theta - TWO_PI * turns
        j = np.clip(np.searchsorted(self._knots, x, side="right") - 1, 0, self._slopes.size - 1)
        return self._vals[j] + self._slopes[j] * (x - self._knots[j]) + TWO_PI * turns

    def to_json(self):
        return {"kind": "zigzag", "s": self.s, "breakpoints": [float(b) for b in self.breakpoints]}


@dataclass(eq=False)
class Sampled(CircleMap):
    """Lift values on the uniform grid ``2 pi j / m``, monotone cubic between nodes."""

    values: np.ndarray
    kind = "sampled"

    def __post_init__(self):
        vals = np.asarray(self.values, float)
        m = vals.size
        if m < 4:
            raise ValueError("sampled map needs at least 4 grid values")
        ext = np.concatenate([vals, [vals[0] + TWO_PI]])
        if np.any(np.diff(ext) <= 0):
            raise ValueError("sampled lift values are not strictly increasing")
        self.values = vals
        # pad one period on each side so the interpolant is periodic-consistent
        theta = TWO_PI * np.arange(-m, 2 * m + 1) / m
        lifted = np.concatenate([vals - TWO_PI, vals, vals + TWO_PI, [vals[0] + 2 * TWO_PI]])
        self._interp = PchipInterpolator(theta, lifted)

    def lift(self, theta):
        theta = np.asarray(theta, float)
        turns = np.floor(theta / TWO_PI)
        return self._interp(theta - TWO_PI * turns) + TWO_PI * turns

    def to_json(self):
        return {"kind": "sampled", "values": [float(v) for v in self.values]}


@dataclass(eq=False)
class Composite(CircleMap):
    """``outer o inner``, evaluated exactly by chaining lifts."""

    outer: CircleMap
    inner: CircleMap
    kind = "compose"

    def lift(self, theta):
        return self.outer.lift(self.inner.lift(theta))

    @property
    def dilatation_hint(self):
        k1, k2 = self.outer.dilatation_hint, self.inner.dilatation_hint
        return None if k1 is None or k2 is None else k1 * k2

    def to_json(self):
        return {"kind": "compose", "outer": self.outer.to_json(), "inner": self.inner.to_json()}


class Identity(Mobius):
    def __init__(self):
        super().__init__(0.0, 0.0)

    def lift(self, theta):
        return np.asarray(theta, float)

    def to_json(self):
        return {"kind": "identity"}


def identity() -> CircleMap:
    return Identity()


def rotation(angle: float) -> Mobius:
    return Mobius(0.0, angle)


def make_mobius(a: complex, angle: float = 0.0) -> Mobius:
    return Mobius(a, angle)


def make_flow_diffeo(v: FourierLoop, t: float = 1.0, steps: int | None = None) -> FlowDiffeo:
    return FlowDiffeo(v, t, steps)


def make_zigzag(s: float, breakpoints=None) -> ZigzagQS:
    if breakpoints is None:
        return ZigzagQS(s)
    return ZigzagQS(s, list(breakpoints))


def compose(h1: CircleMap, h2: CircleMap) -> CircleMap:
    """The map ``h1 o h2``."""
    return Composite(h1, h2)


def invert(h: CircleMap, m: int = DEFAULT_GRID, newton_steps: int = 3) -> Sampled:
    """Sampled inverse on an ``m``-point grid.

    The initial guess comes from monotone interpolation of the swapped
    samples; it is then polished with Newton steps on ``h`` itself so the
    grid values satisfy ``h(h^{-1}(theta_j)) = theta_j`` to rounding.
    """
    theta = TWO_PI * np.arange(m) / m
    hv = h.lift(theta)
    ext = np.concatenate([hv - TWO_PI, hv, hv + TWO_PI, [hv[0] + 2 * TWO_PI]])
    if np.any(np.diff(ext) <= 0):
        raise ValueError("map is not an orientation-preserving homeomorphism on the grid")
    fine = TWO_PI * np.arange(-m, 2 * m + 1) / m
    guess = PchipInterpolator(ext, fine)
    dguess = guess.derivative()
    x = guess(theta)
    for _ in range(newton_steps):
        hx = h.lift(x)
        x = x - (hx - theta) * dguess(hx)
    return Sampled(x)


def normalize(h: CircleMap) -> CircleMap:
    """Post-compose with the disc automorphism taking ``h(1), h(-1), h(-i)``
    back to ``1, -1, -i``."""
    p = np.exp(1j * h.lift(np.array([0.0, np.pi, 1.5 * np.pi])))
    q = np.array([1.0, -1.0, -1j])
    g = _mobius_through(p, q)
    return compose(g, h)


def _three_point(z):
    # Mobius map z -> (z - z0)(z1 - z2) / ((z - z2)(z1 - z0)) sending z0, z1, z2 to 0, 1, inf
    z0, z1, z2 = z
    return np.array([[z1 - z2, -z0 * (z1 - z2)], [z1 - z0, -z2 * (z1 - z0)]], complex)


def _mobius_through(p, q) -> Mobius:
    m = np.linalg.solve(_three_point(q), _three_point(p))
    (A, B), (C, D) = m
    if abs(A) < 1e-300:
        raise ValueError("degenerate normalization")
    a = -B / A
    # g(z) = (A z + B)/(C z + D) = e^{i t} (z - a)/(1 - conj(a) z); compare at z = 0
    if abs(a) < 1e-15:
        rot = A / D
    else:
        rot = (B / D) / (-a)
    return Mobius(a, float(np.angle(rot)))


# cross ratios ---------------------------------------------------------------


@dataclass(frozen=True)
class Quadruple:
    """Four distinct points of the unit circle, stored by angle."""

    angles: tuple

    @property
    def points(self) -> np.ndarray:
        return np.exp(1j * np.asarray(self.angles, float))


def cross_ratio(z1, z2, z3, z4) -> complex:
    """``(z4 - z1)/(z4 - z2) : (z3 - z1)/(z3 - z2)``; vectorized over arrays."""
    z1, z2, z3, z4 = (np.asarray(z, complex) for z in (z1, z2, z3, z4))
    pts = np.stack(np.broadcast_arrays(z1, z2, z3, z4))
    for i in range(4):
        for j in range(i + 1, 4):
            if np.any(np.abs(pts[i] - pts[j]) < 1e-14):
                raise ValueError("cross ratio needs four distinct points")
    rho = ((z4 - z1) / (z4 - z2)) / ((z3 - z1) / (z3 - z2))
    return complex(rho) if rho.ndim == 0 else rho


def half_quadruples(samples: int, rng: np.random.Generator, radius: float = 0.9) -> np.ndarray:
    """Angles ``(samples, 4)`` of quadruples with cross ratio exactly 1/2.

    Each is a random Mobius image of a rotated copy of ``(1, i, -1, -i)``.
    """
    base = np.array([0.0, 0.5, 1.0, 1.5]) * np.pi
    out = np.empty((samples, 4))
    r = radius * np.sqrt(rng.uniform(size=samples))
    phi = rng.uniform(0, TWO_PI, size=samples)
    rot = rng.uniform(0, TWO_PI, size=samples)
    spin = rng.uniform(0, TWO_PI, size=samples)
    for i in range(samples):
        g = Mobius(r[i] * np.exp(1j * phi[i]), spin[i])
        out[i] = g.lift(base + rot[i])
    return out


@dataclass
class BATestResult:
    epsilon_hat: float
    worst_quadruple: Quadruple

    def passes(self, eps: float) -> bool:
        return self.epsilon_hat <= eps < 1


def ba_test(h: CircleMap, samples: int = 10_000, rng_seed: int = 0,
            angles: np.ndarray | None = None) -> BATestResult:
    """Beurling-Ahlfors distortion of cross ratio 1/2 quadruples.

    Returns ``max |2 rho(h(q)) - 2 rho(q)|`` over the sampled quadruples
    (``rho(q) = 1/2`` by construction; subtracting the computed value rather
    than the exact 1/2 makes the identity map score exactly zero).
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if angles is None:
        angles = half_quadruples(samples, np.random.default_rng(rng_seed))
    angles = np.asarray(angles, float)
    z = np.exp(1j * angles)
    w = np.exp(1j * h.lift(angles))
    rho_z = cross_ratio(*z.T)
    rho_w = cross_ratio(*w.T)
    eps = np.abs(2.0 * rho_w - 2.0 * rho_z)
    i = int(np.argmax(eps))
    return BATestResult(float(eps[i]), Quadruple(tuple(float(a) for a in angles[i])))


# serialization -------------------------------------------------------------


def map_from_json(obj) -> CircleMap:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        kind = obj["kind"]
        if kind == "mobius":
            a = obj.get("a", [0.0, 0.0])
            a = complex(*a) if isinstance(a, list) else complex(a)
            return Mobius(a, float(obj.get("angle", 0.0)))
        if kind == "identity":
            return identity()
        if kind == "flow":
            return FlowDiffeo(FourierLoop.from_json(obj["v"]), float(obj.get("t", 1.0)), obj.get("steps"))
        if kind == "zigzag":
            return ZigzagQS(float(obj.get("s", 2.0)), obj.get("breakpoints",
                                                              [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]))
        if kind == "sampled":
            return Sampled(np.asarray(obj["values"], float))
        if kind == "compose":
            return Composite(map_from_json(obj["outer"]), map_from_json(obj["inner"]))
    except KeyError as exc:
        raise ValueError(f"circle map JSON missing field {exc}") from exc
    raise ValueError(f"unknown circle map kind {obj.get('kind')!r}")

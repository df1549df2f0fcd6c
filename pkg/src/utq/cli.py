"""Command-line driver: every experiment as a subcommand with a JSON report.

Each experiment returns named checks.  A check carries a measured value, an
expected value with its provenance tag, a defect and a tolerance; a report
passes iff every asserted defect is within its tolerance.  Checks with no
tolerance are observational.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import circle_maps as cm
from . import composition as co
from . import fock as fq
from . import qcalc as qc
from . import siegel as sg
from .fourier import (FourierLoop, ModeSpec, apply_J0, h_half_norm, kahler_metric,
                      symplectic_form)

EXIT_FAIL = 1
EXIT_UNKNOWN = 2
EXIT_BAD_JSON = 3
EXIT_MISSING = 4
EXIT_INVALID = 5


class CliError(Exception):
    code = EXIT_INVALID


class UnknownExperiment(CliError):
    code = EXIT_UNKNOWN


class MalformedJSON(CliError):
    code = EXIT_BAD_JSON


class MissingFile(CliError):
    code = EXIT_MISSING


class InvalidConfig(CliError):
    code = EXIT_INVALID


def load_json(value, what: str = "input"):
    """Accept an inline object, an inline JSON string or a path to a JSON file."""
    if isinstance(value, (dict, list)):
        return value
    if isinstance(value, str) and value.lstrip()[:1] in ("{", "["):
        try:
            return json.loads(value)
        except json.JSONDecodeError as exc:
            raise MalformedJSON(f"{what}: malformed inline JSON: {exc}") from None
    path = Path(value)
    if not path.exists() or path.is_dir():
        raise MissingFile(f"{what}: file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedJSON(f"{what}: malformed JSON in {path}: {exc}") from None


def _parse(loader, value, what):
    try:
        return loader(load_json(value, what))
    except CliError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidConfig(f"{what}: {exc}") from None


def _cplx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


@dataclass
class Checks:
    measured: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    defect: dict = field(default_factory=dict)
    tol: dict = field(default_factory=dict)
    tag: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def add(self, name, measured, expected, defect, tol, tag):
        self.measured[name] = measured
        self.expected[name] = expected
        self.defect[name] = None if defect is None else float(defect)
        self.tol[name] = tol
        self.tag[name] = tag

    @property
    def passed(self) -> bool:
        return all(self.tol[k] is None or (self.defect[k] is not None and self.defect[k] <= self.tol[k])
                   for k in self.defect)


# experiments -----------------------------------------------------------------


def exp_loop_norm(p) -> Checks:
    spec = ModeSpec(int(p["modes"]))
    rng = np.random.default_rng(p["seed"])
    c = Checks()
    g_def = inv_def = 0.0
    for _ in range(int(p["pairs"])):
        xi = FourierLoop.random(spec, rng, decay=1.0)
        eta = FourierLoop.random(spec, rng, decay=1.0)
        g_def = max(g_def, abs(kahler_metric(xi, eta) - symplectic_form(xi, apply_J0(eta))))
        inv_def = max(inv_def, abs(symplectic_form(apply_J0(xi), apply_J0(eta)) - symplectic_form(xi, eta)))
    c.add("metric_from_omega", g_def, 0.0, g_def, p["tol"], "DERIVED")
    c.add("J0_invariance", inv_def, 0.0, inv_def, p["tol"], "DERIVED")
    if p.get("loop") is not None:
        f = _parse(FourierLoop.from_json, p["loop"], "loop")
        direct = float(np.sqrt(2 * sum(k * abs(f.coeff(k)) ** 2 for k in range(1, f.spec.n + 1))))
        norm = h_half_norm(f)
        c.add("half_norm", norm, direct, abs(norm - direct), p["tol"] * max(1.0, direct), "DERIVED")
    return c


def exp_map_check_qs(p) -> Checks:
    h = _parse(cm.map_from_json, p["map"], "map")
    res = cm.ba_test(h, int(p["samples"]), int(p["seed"]))
    c = Checks()
    if h.kind in ("mobius", "identity"):
        c.add("epsilon_hat", res.epsilon_hat, 0.0, res.epsilon_hat, p["tol"], "DERIVED")
    else:
        # quasisymmetric but not Mobius: strictly between 0 and 1
        gap = 0.0 if 0 < res.epsilon_hat < 1 else 1.0
        c.add("epsilon_hat", res.epsilon_hat, "(0, 1)", gap, 0.0, "DERIVED")
    c.info["worst_quadruple"] = list(res.worst_quadruple.angles)
    return c


def _operator(p):
    h = _parse(cm.map_from_json, p["map"], "map")
    return h, co.build_Th(h, ModeSpec(int(p["modes"])), int(p["grid"]))


def exp_op_th(p) -> Checks:
    h, T = _operator(p)
    c = Checks()
    d = co.check_symplectic(T, band=int(p["band"]), seed=int(p["seed"]))
    c.add("symplectic_defect", d, 0.0, d, p["tol"], "DERIVED")
    band = int(p.get("interior") or T.spec.n // 4)
    r1, r2 = co.blocks(T).relation_defects(band)
    c.add("block_relations", [r1, r2], [0.0, 0.0], max(r1, r2), None, "DERIVED")
    if p.get("out"):
        T.save(p["out"], {"map": h.to_json(), "grid": int(p["grid"])})
        c.info["written"] = str(Path(p["out"]) / "matrix.csv")
    return c


def exp_op_symplectic(p) -> Checks:
    h, T = _operator(p)
    c = Checks()
    d = co.check_symplectic(T, band=int(p["band"]), seed=int(p["seed"]))
    c.add("symplectic_defect", d, 0.0, d, p["tol"], "DERIVED")
    nc = co.operator_norm_bound_check(h, T)
    c.add("norm_bound", nc.norm_est, {"bound": nc.bound, "K": nc.dilatation},
          max(0.0, nc.norm_est - nc.bound), 1e-6, "DERIVED")
    if h.kind in ("mobius", "identity"):
        A = co.blocks(T)
        band = int(p.get("interior") or T.spec.n // 4)
        b = float(np.linalg.norm(A.b))
        # columns <= band keep their full row spread
        u = float(np.linalg.norm((A.a.conj().T @ A.a)[:band, :band] - np.eye(band)))
        c.add("mobius_b", b, 0.0, b, p["block_tol"], "DERIVED")
        c.add("mobius_a_unitary", u, 0.0, u, p["block_tol"], "DERIVED")
    return c


def _test_loop(p, spec):
    if p.get("f") is not None:
        return _parse(FourierLoop.from_json, p["f"], "f")
    return FourierLoop.random(spec, np.random.default_rng(p["seed"]), band=int(p["band"]))


QDIFF_TOL = {"hilbert": 1e-8, "hsnorm": 1e-12, "rank": 0.0, "kernel": 1e-8, "quasiclassical": 1e-4}


def exp_qdiff(p) -> Checks:
    check = p["check"]
    if check not in QDIFF_TOL:
        raise InvalidConfig(f"unknown qdiff check {check!r}")
    p = {**p, "tol": QDIFF_TOL[check] if p["tol"] is None else p["tol"]}
    spec = ModeSpec(int(p["modes"]))
    c = Checks()
    if check == "hilbert":
        f = _test_loop(p, spec)
        oracle = qc.hilbert_quadrature_oracle(f, int(p["grid"]))
        spectral = qc.hilbert_transform(oracle.spec).apply(f)
        d = float(np.max(np.abs(oracle.coeffs - spectral.coeffs)))
        c.add("pv_oracle", d, 0.0, d, p["tol"], "DERIVED")
        fz = f.resized(spec)
        iJ = FourierLoop(spec, 1j * apply_J0(fz).coeffs)
        d2 = float(np.max(np.abs(qc.hilbert_transform(spec).apply(fz).coeffs - iJ.coeffs)))
        c.add("S_equals_iJ0", d2, 0.0, d2, 0.0, "THEORY")
    elif check == "hsnorm":
        rng = np.random.default_rng(p["seed"])
        if p.get("f") is not None:
            loops = [_parse(FourierLoop.from_json, p["f"], "f")]
        else:
            loops = [FourierLoop.random(ModeSpec(int(p["band"])), rng) for _ in range(int(p["samples"]))]
        ratios = np.array([qc.hs_norm_vs_sobolev(f).ratio for f in loops])
        spread = float((ratios.max() - ratios.min()) / ratios.mean())
        c.add("ratio_spread", spread, 0.0, spread, p["tol"], "DERIVED")
        single = FourierLoop.from_modes(ModeSpec(1), {1: 1.0}, real=True)
        oracle = qc.hs_norm_vs_sobolev(single).ratio
        d = float(np.max(np.abs(ratios - oracle)))
        c.add("ratio_vs_single_mode", float(ratios.mean()), oracle, d, p["tol"] * oracle, "DERIVED")
    elif check == "rank":
        if p.get("f") is not None:
            f = _parse(FourierLoop.from_json, p["f"], "f")
            r = qc.quantum_differential(f).rank(p["threshold"])
            nz = [k for k in f.spec.modes if abs(f.coeff(int(k))) > p["threshold"]]
            expected = max([k for k in nz if k > 0], default=0) + max([-k for k in nz if k < 0], default=0)
            c.add("rank", r, int(expected), abs(r - expected), 0.0, "DERIVED")
        else:
            ranks, want = [], []
            for k in range(1, int(p["max_k"]) + 1):
                f = FourierLoop.from_modes(ModeSpec(k), {k: 1.0}, real=False)
                ranks.append(qc.quantum_differential(f, ModeSpec(2 * k + 2, True)).rank(p["threshold"]))
                want.append(k)
            c.add("rank_z_power", ranks, want, int(np.sum(np.abs(np.subtract(ranks, want)))), 0.0, "DERIVED")
    elif check == "kernel":
        f = _test_loop(p, spec)
        quad = qc.kernel_quadrature_dq(f, spec, int(p["grid"]))
        exact = qc.quantum_differential(f, spec).matrix
        d = float(np.max(np.abs(quad - exact)))
        c.add("kernel_vs_commutator", d, 0.0, d, p["tol"], "DERIVED")
    elif check == "quasiclassical":
        f = _test_loop(p, spec)
        rep = qc.quasiclassical_check(f)
        c.add("diagonal_limit", rep.defect, 0.0, rep.defect, p["tol"], "DERIVED")
        c.info["raw_defects"] = list(rep.raw_defects)
    if p.get("out"):
        out = Path(p["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"qdiff_{check}.json").write_text(json.dumps(c.measured, indent=2, sort_keys=True))
    return c


def exp_siegel_act(p) -> Checks:
    c = Checks()
    if p.get("a") is not None:
        for key in ("a", "b", "z"):
            if p.get(key) is None:
                raise InvalidConfig(f"siegel act needs --{key}")
        for key in ("a", "b"):
            if not Path(p[key]).exists():
                raise MissingFile(f"{key}: file not found: {p[key]}")
        try:
            A = sg.SymplecticElement(sg.read_block_csv(p["a"]), sg.read_block_csv(p["b"]))
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from None
        Z = _parse(sg.SiegelPoint.from_json, p["z"], "z")
        W = sg.act(A, Z)
        chk = sg.in_disc(W)
        c.add("image_in_disc", chk.min_eig, "> 0", 0.0 if chk.ok else 1.0, 0.0, "THEORY")
        c.info["image"] = W.to_json()
        return c
    rng = np.random.default_rng(p["seed"])
    n = int(p["modes"])
    law = orig = 0.0
    for i in range(int(p["samples"])):
        A1 = sg.random_symplectic(n, seed=int(rng.integers(2**31)))
        A2 = sg.random_symplectic(n, seed=int(rng.integers(2**31)))
        Z = sg.SiegelPoint.random(n, rng, 0.5)
        law = max(law, float(np.linalg.norm(sg.act(A1 @ A2, Z).z - sg.act(A1, sg.act(A2, Z)).z)))
        o = sg.act(A1, sg.SiegelPoint.zero(n)).z
        orig = max(orig, float(np.linalg.norm(o - A1.b.conj() @ np.linalg.inv(A1.a))))
    c.add("group_law", law, 0.0, law, p["tol"], "DERIVED")
    c.add("origin_image", orig, 0.0, orig, 1e-10, "DERIVED")
    U = sg.SymplecticElement(sg.expm_taylor(1j * np.diag(np.arange(1.0, n + 1))), np.zeros((n, n)))
    B = sg.random_symplectic(n, seed=int(p["seed"]))
    ok = sg.stabilizer_check(U) and not sg.stabilizer_check(B)
    c.add("stabilizer", ok, True, 0.0 if ok else 1.0, 0.0, "THEORY")
    return c


def _fock_config(p) -> fq.FockConfig:
    try:
        return fq.FockConfig(int(p["modes"]), int(p["degree"]), float(p.get("lam", 1.0)))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None


def exp_fock_ccr(p) -> Checks:
    cfg = _fock_config(p)
    d = cfg.max_degree - 2
    eye = fq.identity_op(cfg).on_interior(d)
    worst = 0.0
    for m in range(1, cfg.n_modes + 1):
        for n in range(1, cfg.n_modes + 1):
            am, an = fq.annihilation(cfg, m), fq.annihilation(cfg, n)
            ccr = fq.commutator(am, fq.creation(cfg, n)).on_interior(d) - (m == n) * eye
            worst = max(worst, float(np.abs(ccr).max()), float(np.abs(fq.commutator(am, an).on_interior(d)).max()))
    c = Checks()
    c.add("ccr", worst, 0.0, worst, p["tol"], "DERIVED")
    rng = np.random.default_rng(p["seed"])
    scalars, offdiag = [], 0.0
    for _ in range(int(p["pairs"])):
        x = rng.standard_normal(cfg.n_modes) + 1j * rng.standard_normal(cfg.n_modes)
        y = rng.standard_normal(cfg.n_modes) + 1j * rng.standard_normal(cfg.n_modes)
        com = fq.commutator(fq.heisenberg_rep(cfg, x), fq.heisenberg_rep(cfg, y)).on_interior(d)
        om = fq.omega_coords(x, x.conj(), y, y.conj())
        s = com[0, 0] / om
        scalars.append(s)
        offdiag = max(offdiag, float(np.abs(com - s * om * eye).max()))
    scalars = np.array(scalars)
    spread = float(np.max(np.abs(scalars - scalars[0])))
    c.add("heisenberg_scalar", _cplx(scalars[0]), _cplx(1j), max(spread, offdiag), p["tol"], "DERIVED")
    return c


def exp_fock_coherent(p) -> Checks:
    cfg = _fock_config(p)
    c = Checks()
    if p.get("z") is not None:
        Z1 = _parse(sg.SiegelPoint.from_json, p["z"], "z")
        Z2 = _parse(sg.SiegelPoint.from_json, p["z2"], "z2") if p.get("z2") is not None else Z1
        cfg = fq.FockConfig(Z1.n, cfg.max_degree, cfg.lam)
        ov = fq.coherent_inner(cfg, Z1, Z2)
        c.add("determinant_formula", _cplx(ov.truncated), _cplx(ov.closed_form),
              ov.relative_error, p["tol"], "THEORY")
        return c
    rng = np.random.default_rng(p["seed"])
    worst = 0.0
    for _ in range(int(p["pairs"])):
        Z1 = sg.SiegelPoint.random(cfg.n_modes, rng, p["znorm"])
        Z2 = sg.SiegelPoint.random(cfg.n_modes, rng, p["znorm"])
        worst = max(worst, fq.coherent_inner(cfg, Z1, Z2).relative_error)
    c.add("determinant_formula", worst, 0.0, worst, p["tol"], "THEORY")
    # one mode: sum_d (|z|^2/4)^d (2d)!/(d!)^2 = (1 - |z|^2)^{-1/2}
    one = fq.FockConfig(1, cfg.max_degree)
    zeta = 0.3 * np.exp(0.7j)
    ov = fq.coherent_inner(one, [[zeta]], [[zeta]])
    exact = (1 - abs(zeta) ** 2) ** -0.5
    c.add("single_mode_series", ov.truncated.real, exact, abs(ov.truncated - exact), p["tol"], "DERIVED")
    return c


def exp_fock_cocycle(p) -> Checks:
    cfg = _fock_config(p)
    c = Checks()
    if p.get("x1") is not None:
        X1 = _parse(fq.SpAlgebraElement.from_json, p["x1"], "x1")
        X2 = _parse(fq.SpAlgebraElement.from_json, p["x2"], "x2") if p.get("x2") is not None else X1
        cfg = fq.FockConfig(X1.n, cfg.max_degree, cfg.lam)
        r = fq.cocycle_defect(cfg, X1, X2)
        c.add("cocycle", _cplx(r.operator_scalar), _cplx(r.closed_form),
              abs(r.operator_scalar - r.closed_form), p["tol"], "THEORY")
        return c
    rng = np.random.default_rng(p["seed"])
    worst = 0.0
    for _ in range(int(p["pairs"])):
        X1 = fq.SpAlgebraElement.random(cfg.n_modes, rng)
        X2 = fq.SpAlgebraElement.random(cfg.n_modes, rng)
        r = fq.cocycle_defect(cfg, X1, X2)
        worst = max(worst, abs(r.operator_scalar - r.closed_form))
    c.add("cocycle_random", worst, 0.0, worst, p["tol"], "THEORY")
    n = cfg.n_modes
    E, Z = np.zeros((n, n)), np.zeros((n, n))
    E[0, 0] = 1.0
    r = fq.cocycle_defect(cfg, fq.SpAlgebraElement(Z, E, Z), fq.SpAlgebraElement(Z, Z, E))
    c.add("cocycle_rank_one", _cplx(r.operator_scalar), _cplx(0.5),
          abs(r.operator_scalar - 0.5), p["tol"], "DERIVED")
    return c


def exp_fock_segal(p) -> Checks:
    cfg = _fock_config(p)
    rng = np.random.default_rng(p["seed"])
    worst = 0.0
    for i in range(int(p["pairs"])):
        A = sg.random_symplectic(cfg.n_modes, seed=int(rng.integers(2**31)), strength=p["strength"])
        Z1 = sg.SiegelPoint.random(cfg.n_modes, rng, p["znorm"])
        Z2 = sg.SiegelPoint.random(cfg.n_modes, rng, p["znorm"])
        after, before = fq.segal_unitarity_defect(cfg, A, Z1, Z2)
        worst = max(worst, abs(after - before))
    c = Checks()
    c.add("projective_unitarity", worst, 0.0, worst, p["tol"], "DERIVED")
    return c


def exp_fock_dgamma(p) -> Checks:
    cfg = _fock_config(p)
    rng = np.random.default_rng(p["seed"])
    c = Checks()
    d = cfg.max_degree - 2
    worst = 0.0
    for _ in range(int(p["pairs"])):
        X = rng.standard_normal((cfg.n_modes,) * 2) + 1j * rng.standard_normal((cfg.n_modes,) * 2)
        Y = rng.standard_normal((cfg.n_modes,) * 2) + 1j * rng.standard_normal((cfg.n_modes,) * 2)
        lhs = fq.second_quantize(cfg, X @ Y - Y @ X)
        rhs = fq.commutator(fq.second_quantize(cfg, X), fq.second_quantize(cfg, Y))
        worst = max(worst, float(np.abs((lhs - rhs).on_interior(d)).max()))
    c.add("bracket_random", worst, 0.0, worst, p["tol"], "DERIVED")
    maps = p.get("map") or []
    if not isinstance(maps, list):
        maps = [maps]
    if maps:
        hs = [_parse(cm.map_from_json, m, "map") for m in maps]
        gens = fq.map_generators(cfg, hs, int(p["grid"]))
        c.add("bracket_maps", gens.bracket_defect, 0.0, gens.bracket_defect, p["tol"], "DERIVED")
        c.info["generators"] = [
            {"map": lab, "one_particle_norm": float(np.linalg.norm(x)), "dq_plus_block_norm": dq}
            for lab, x, dq in zip(gens.labels, gens.one_particle, gens.dq_plus_norms)]
    return c


def exp_report_shale(p) -> Checks:
    h = _parse(cm.map_from_json, p["map"], "map")
    modes = [int(m) for m in p["modes_list"]]
    try:
        rows = co.shale_table(h, modes, int(p["grid"]))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    c = Checks()
    diffs = [abs(r["diff"]) for r in rows[1:]]
    norms = [r["hs_b"] for r in rows]
    if h.kind == "zigzag":
        c.add("hs_b_column", norms, "reported only", None, None, "OBSERVATIONAL")
    elif h.kind in ("mobius", "identity"):
        c.add("hs_b_zero", max(norms), 0.0, max(norms), 1e-8, "DERIVED")
    else:
        bad = co.count_nonconvergent_steps(rows)
        c.add("differences_decrease", diffs, "strictly decreasing", bad, 0.0, "DERIVED")
    c.info["table"] = rows
    if p.get("out"):
        out = Path(p["out"])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "shale.csv", "w") as fh:
            fh.write("N,hs_b,diff\n")
            for r in rows:
                fh.write(f"{r['N']},{float(r['hs_b'])!r},{'' if r['diff'] is None else repr(float(r['diff']))}\n")
    return c


_IDENTITY = {"kind": "identity"}

EXPERIMENTS = {
    "loop norm": (exp_loop_norm, {"modes": 64, "seed": 0, "pairs": 100, "tol": 1e-12, "loop": None}),
    "map check-qs": (exp_map_check_qs, {"map": _IDENTITY, "samples": 10_000, "seed": 0, "tol": 1e-10}),
    "op th": (exp_op_th, {"map": _IDENTITY, "modes": 64, "grid": 4096, "band": 8, "seed": 0,
                          "tol": 1e-6, "interior": None, "out": None}),
    "op symplectic": (exp_op_symplectic, {"map": _IDENTITY, "modes": 64, "grid": 4096, "band": 8,
                                          "seed": 0, "tol": 1e-6, "block_tol": 1e-8, "interior": None}),
    "qdiff": (exp_qdiff, {"f": None, "check": "hsnorm", "modes": 32, "grid": 8192, "band": 8,
                          "samples": 20, "max_k": 8, "threshold": 1e-10, "seed": 0, "tol": None,
                          "out": None}),
    "siegel act": (exp_siegel_act, {"a": None, "b": None, "z": None, "modes": 4, "samples": 100,
                                    "seed": 0, "tol": 1e-8}),
    "fock ccr": (exp_fock_ccr, {"modes": 3, "degree": 12, "pairs": 50, "seed": 0, "tol": 1e-12}),
    "fock coherent": (exp_fock_coherent, {"z": None, "z2": None, "modes": 3, "degree": 24,
                                          "pairs": 10, "znorm": 0.3, "seed": 0, "tol": 1e-8}),
    "fock cocycle": (exp_fock_cocycle, {"x1": None, "x2": None, "modes": 3, "degree": 10,
                                        "pairs": 10, "seed": 0, "tol": 1e-10}),
    "fock segal": (exp_fock_segal, {"modes": 3, "degree": 24, "pairs": 10, "znorm": 0.25,
                                    "strength": 0.1, "seed": 0, "tol": 1e-6}),
    "fock dgamma": (exp_fock_dgamma, {"map": None, "modes": 3, "degree": 8, "pairs": 10,
                                      "grid": 1024, "seed": 0, "tol": 1e-12}),
    "report shale": (exp_report_shale, {"map": _IDENTITY, "modes_list": [16, 32, 64, 128],
                                        "grid": 4096, "out": None}),
}


def validate(name: str, params: dict) -> dict:
    if name not in EXPERIMENTS:
        raise UnknownExperiment(f"unknown subcommand {name!r}; known: {', '.join(sorted(EXPERIMENTS))}")
    defaults = EXPERIMENTS[name][1]
    unknown = set(params) - set(defaults) - {"lam"}
    if unknown:
        raise InvalidConfig(f"{name}: unknown parameters {sorted(unknown)}")
    merged = {**defaults, **{k: v for k, v in params.items() if v is not None}}
    for key, val in merged.items():
        if val is None:
            continue
        if (key == "tol" or key.endswith("_tol")) and (not isinstance(val, (int, float)) or val < 0):
            raise InvalidConfig(f"{name}: tolerance {key} must be a nonnegative number, got {val!r}")
    return merged


def run(name: str, params: dict | None = None) -> dict:
    """Run one experiment and return its report."""
    merged = validate(name, params or {})
    t0 = time.perf_counter()
    checks = EXPERIMENTS[name][0](merged)
    return {
        "test": name,
        "params": merged,
        "measured": checks.measured,
        "expected": checks.expected,
        "defect": checks.defect,
        "tol": checks.tol,
        "tag": checks.tag,
        "info": checks.info,
        "passed": checks.passed,
        "wall_clock_s": round(time.perf_counter() - t0, 3),
    }


def default_suite() -> dict:
    return json.loads(resources.files("utq").joinpath("data/acceptance.json").read_text())


def run_suite(suite) -> dict:
    """Run every entry of a suite (``{"experiments": [{"id", "test", "params"}]}``)."""
    if not isinstance(suite, dict) or not isinstance(suite.get("experiments", []), list):
        raise InvalidConfig("suite must be an object with an 'experiments' list")
    entries = suite.get("experiments", [])
    # validate everything before computing anything
    for i, e in enumerate(entries):
        if "test" not in e:
            raise InvalidConfig(f"suite entry {i} has no 'test'")
        validate(e["test"], e.get("params", {}))
    t0 = time.perf_counter()
    reports = []
    for i, e in enumerate(entries):
        rep = run(e["test"], e.get("params", {}))
        rep["id"] = e.get("id", str(i))
        reports.append(rep)
    return {"suite": suite.get("name", "suite"), "reports": reports,
            "passed": all(r["passed"] for r in reports),
            "wall_clock_s": round(time.perf_counter() - t0, 3)}


def summary_table(reports) -> str:
    lines = [f"{'id':<28} {'test':<16} {'check':<24} {'defect':>11} {'tol':>9}  result"]
    for r in reports:
        for k in r["defect"]:
            d, t = r["defect"][k], r["tol"][k]
            verdict = "obs" if t is None else ("PASS" if d is not None and d <= t else "FAIL")
            ds = "-" if d is None else f"{d:.3g}"
            ts = "-" if t is None else f"{t:.0e}"
            lines.append(f"{r.get('id', r['test']):<28} {r['test']:<16} {k:<24} {ds:>11} {ts:>9}  {verdict}")
    return "\n".join(lines)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default)


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return _cplx(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


# argument parsing ------------------------------------------------------------


def _common(p, *names):
    if "modes" in names:
        p.add_argument("--modes", type=int)
    if "grid" in names:
        p.add_argument("--grid", type=int)
    if "degree" in names:
        p.add_argument("--degree", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="utq", description="Quantized loop-space experiments.")
    sub = ap.add_subparsers(dest="group", required=True)

    loop = sub.add_parser("loop", help="loop-space structures").add_subparsers(dest="cmd", required=True)
    p = loop.add_parser("norm", help="H^1/2 norm and structure compatibility")
    _common(p, "modes")
    p.add_argument("--loop")
    p.add_argument("--pairs", type=int)

    mp = sub.add_parser("map", help="circle homeomorphisms").add_subparsers(dest="cmd", required=True)
    p = mp.add_parser("check-qs", help="cross-ratio distortion test")
    _common(p)
    p.add_argument("--map")
    p.add_argument("--samples", type=int)

    op = sub.add_parser("op", help="composition operators").add_subparsers(dest="cmd", required=True)
    for name, text in (("th", "build and save the matrix of T_h"),
                       ("symplectic", "symplecticity, norm bound and Mobius block checks")):
        p = op.add_parser(name, help=text)
        _common(p, "modes", "grid")
        p.add_argument("--map")
        p.add_argument("--band", type=int)
        p.add_argument("--interior", type=int)

    p = sub.add_parser("qdiff", help="quantum differential checks")
    _common(p, "modes", "grid")
    p.add_argument("--f")
    p.add_argument("--check", choices=["hilbert", "hsnorm", "rank", "kernel", "quasiclassical"])
    p.add_argument("--band", type=int)
    p.add_argument("--samples", type=int)

    sgp = sub.add_parser("siegel", help="Siegel disc").add_subparsers(dest="cmd", required=True)
    p = sgp.add_parser("act", help="fractional-linear action")
    _common(p, "modes")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--z")
    p.add_argument("--samples", type=int)

    fk = sub.add_parser("fock", help="truncated Fock space").add_subparsers(dest="cmd", required=True)
    p = fk.add_parser("ccr", help="canonical commutation relations")
    _common(p, "modes", "degree")
    p.add_argument("--pairs", type=int)
    p = fk.add_parser("coherent", help="coherent-state overlaps")
    _common(p, "modes", "degree")
    p.add_argument("--z")
    p.add_argument("--z2")
    p.add_argument("--pairs", type=int)
    p = fk.add_parser("cocycle", help="Lie algebra cocycle")
    _common(p, "modes", "degree")
    p.add_argument("--x1")
    p.add_argument("--x2")
    p.add_argument("--pairs", type=int)
    p = fk.add_parser("segal", help="unitarity of the Siegel-disc action")
    _common(p, "modes", "degree")
    p.add_argument("--pairs", type=int)
    p = fk.add_parser("dgamma", help="second quantization brackets")
    _common(p, "modes", "degree", "grid")
    p.add_argument("--map", action="append")
    p.add_argument("--pairs", type=int)

    rp = sub.add_parser("report", help="tables").add_subparsers(dest="cmd", required=True)
    p = rp.add_parser("shale", help="||b||_F convergence table")
    _common(p, "grid")
    p.add_argument("--map")
    p.add_argument("--modes", dest="modes_list", help="comma-separated increasing list")

    p = sub.add_parser("suite", help="run a suite file (default: shipped acceptance suite)")
    p.add_argument("file", nargs="?")
    p.add_argument("--out")
    return ap


def _params(ns) -> tuple[str, dict, str | None]:
    d = dict(vars(ns))
    name = d.pop("group")
    cmd = d.pop("cmd", None)
    if cmd:
        name = f"{name} {cmd}"
    if isinstance(d.get("modes_list"), str):
        try:
            d["modes_list"] = [int(x) for x in d["modes_list"].split(",") if x]
        except ValueError:
            raise InvalidConfig(f"bad modes list {d['modes_list']!r}") from None
    if name in ("map check-qs", "op th", "op symplectic", "report shale") and d.get("map") is None:
        d.pop("map", None)
    out = d.get("out")
    if name in ("loop norm", "map check-qs", "op symplectic", "siegel act") or name.startswith("fock"):
        d.pop("out", None)
    return name, {k: v for k, v in d.items() if v is not None}, out


def _write(out, report, table) -> None:
    if not out:
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / "report.json").write_text(_dump(report) + "\n")
    (path / "summary.txt").write_text(table + "\n")


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed the diagnostic; unknown subcommands land here
        return EXIT_UNKNOWN if exc.code else 0
    try:
        if ns.group == "suite":
            suite = default_suite() if ns.file is None else load_json(ns.file, "suite")
            report = run_suite(suite)
            table = summary_table(report["reports"])
            out = ns.out
        else:
            name, params, out = _params(ns)
            report = run(name, params)
            report["id"] = name
            table = summary_table([report])
    except CliError as exc:
        print(f"utq: error: {exc}", file=sys.stderr)
        return exc.code
    except (sg.SiegelError, ValueError, RuntimeError) as exc:
        print(f"utq: computation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(_dump(report))
    print(table, file=sys.stderr)
    _write(out, report, table)
    return 0 if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

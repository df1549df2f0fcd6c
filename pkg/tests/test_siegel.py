import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from utq.siegel import (SiegelError, SiegelPoint, SymplecticElement, act, expm_taylor, in_disc,
                        random_algebra_element, random_symplectic, read_block_csv,
                        stabilizer_check, write_block_csv)


def test_in_disc_examples():
    c = in_disc(np.zeros((3, 3)))
    assert c.ok and c.min_eig == 1.0
    c = in_disc(0.5 * np.eye(2))
    assert c.ok and c.min_eig == pytest.approx(0.75)
    c = in_disc(np.eye(2))
    assert not c.ok and c.min_eig == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(SiegelError):
        in_disc(np.zeros((2, 3)))


def test_point_symmetry_policy():
    z = np.array([[0.1, 0.2], [0.2 + 1e-10, 0.0]])
    assert np.array_equal(SiegelPoint(z).z, SiegelPoint(z).z.T)
    with pytest.raises(SiegelError):
        SiegelPoint(np.array([[0.0, 0.1], [0.0, 0.0]]))


def test_point_json_round_trip(rng):
    Z = SiegelPoint.random(3, rng, 0.4)
    back = SiegelPoint.from_json(json.dumps(Z.to_json()))
    assert np.array_equal(back.z, Z.z)
    assert np.linalg.norm(Z.z, 2) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        SiegelPoint.from_json({"n": 2})


def test_identity_action(rng):
    Z = SiegelPoint.random(4, rng)
    assert np.allclose(act(SymplecticElement.identity(4), Z).z, Z.z, atol=1e-15)


def test_origin_image():
    A = random_symplectic(5, seed=3)
    W = act(A, SiegelPoint.zero(5))
    assert np.linalg.norm(W.z - A.b.conj() @ np.linalg.inv(A.a)) < 1e-10


def test_group_law(rng):
    worst = 0.0
    for i in range(100):
        A1, A2 = random_symplectic(4, seed=2 * i), random_symplectic(4, seed=2 * i + 1)
        Z = SiegelPoint.random(4, rng, 0.5)
        worst = max(worst, np.linalg.norm(act(A1 @ A2, Z).z - act(A1, act(A2, Z)).z))
    assert worst < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.95), st.integers(1, 5))
def test_action_stays_in_disc(seed, norm, n):
    rng = np.random.default_rng(seed)
    Z = SiegelPoint.random(n, rng, norm)
    W = act(random_symplectic(n, seed=seed, strength=0.3), Z)
    assert in_disc(W).ok


def test_dimension_mismatch(rng):
    with pytest.raises(SiegelError):
        act(SymplecticElement.identity(3), SiegelPoint.random(2, rng))


def test_stabilizer():
    U = SymplecticElement(np.diag(np.exp(1j * np.array([0.3, 1.1, -2.0]))), np.zeros((3, 3)))
    assert stabilizer_check(U)
    assert stabilizer_check(SymplecticElement.identity(3))
    A = random_symplectic(3, seed=5)
    assert not stabilizer_check(A)
    assert np.linalg.norm(act(A, SiegelPoint.zero(3)).z) > 1e-3


def test_unitary_action_keeps_singular_values(rng):
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    u, _ = np.linalg.qr(g)
    A = SymplecticElement(u, np.zeros((4, 4)))
    Z = SiegelPoint.random(4, rng, 0.6)
    sv = np.linalg.svd(act(A, Z).z, compute_uv=False)
    assert np.allclose(sv, np.linalg.svd(Z.z, compute_uv=False), atol=1e-13)


def test_random_symplectic_properties():
    assert np.allclose(random_symplectic(4, seed=1, strength=0.0).matrix(), np.eye(8))
    for seed in range(10):
        A = random_symplectic(6, seed=seed, band=4)
        r1, r2 = A.relation_defects()
        assert r1 < 1e-10 and r2 < 1e-10
        assert in_disc(act(A, SiegelPoint.zero(6))).ok
    with pytest.raises(SiegelError):
        random_algebra_element(3, np.random.default_rng(0), band=4)


def test_inverse():
    A = random_symplectic(5, seed=11)
    P = A @ A.inverse()
    assert np.allclose(P.a, np.eye(5), atol=1e-12) and np.allclose(P.b, 0, atol=1e-12)


def test_expm_against_scipy(rng):
    for scale in (0.01, 1.0, 8.0):
        x = scale * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        ref = scipy.linalg.expm(x)
        assert np.linalg.norm(expm_taylor(x) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_block_csv_round_trip(tmp_path, rng):
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    write_block_csv(tmp_path / "m.csv", m)
    assert np.array_equal(read_block_csv(tmp_path / "m.csv"), m)
    (tmp_path / "empty.csv").write_text("row,col,re,im\n")
    with pytest.raises(ValueError):
        read_block_csv(tmp_path / "empty.csv")

"""Principal angles between gait subspaces and the deviation metric."""

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from scomo.errors import SubspaceError
from scomo.similarity import (
    DEVIATION_MEASURES,
    Subspace,
    deviation_between,
    gait_deviation,
    orthonormal_basis,
    principal_angles,
    write_deviation_csv,
)


def eigen_oracle_thetas(a_rows, b_rows):
    """Independent oracle: angles from the eigenvalues of M M^T."""
    m = a_rows @ b_rows.T
    evals = np.linalg.eigvalsh(m @ m.T)
    sigmas = np.sqrt(np.clip(evals, 0.0, 1.0))[::-1]
    return np.arccos(sigmas)


def random_subspace(rng, k, d):
    return orthonormal_basis(rng.normal(size=(k, d)))


# ---------------------------------------------------------------------------
# basis construction


def test_orthonormal_basis_properties():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(3, 9))
    sub = orthonormal_basis(rows)
    assert sub.basis.shape == (3, 9)
    assert np.abs(sub.basis @ sub.basis.T - np.eye(3)).max() < 1e-10
    # same span: projectors agree
    p_rows = rows.T @ np.linalg.solve(rows @ rows.T, rows)
    assert np.abs(sub.projector() - p_rows).max() < 1e-9


def test_orthonormal_basis_is_idempotent_and_deterministic():
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(4, 7))
    once = orthonormal_basis(rows).basis
    twice = orthonormal_basis(once).basis
    # re-orthonormalizing an orthonormal basis reproduces it
    assert np.abs(twice - once).max() < 1e-12
    again = orthonormal_basis(rows).basis
    assert np.array_equal(once, again)


def test_orthonormal_basis_rejects_rank_deficiency():
    rows = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(SubspaceError):
        orthonormal_basis(rows)


def test_subspace_validation():
    with pytest.raises(SubspaceError):
        Subspace(basis=np.array([[0.6, 0.8], [0.8, 0.6]]))  # not orthonormal
    with pytest.raises(SubspaceError):
        Subspace(basis=np.zeros(3))  # not 2-D
    # k cannot exceed ambient dimension
    with pytest.raises(SubspaceError):
        Subspace(basis=np.vstack([np.eye(2), np.eye(2)]))


# ---------------------------------------------------------------------------
# principal angles


def test_identical_subspaces_have_zero_angles():
    rng = np.random.default_rng(2)
    sub = random_subspace(rng, 4, 10)
    result = principal_angles(sub, sub)
    assert np.abs(result.thetas).max() == 0.0
    assert np.abs(result.sigmas - 1.0).max() == 0.0
    assert gait_deviation(result, "sum_angles") == 0.0
    assert abs(gait_deviation(result, "sum_cosines") - 4.0) < 1e-12


def test_orthogonal_subspaces_are_90_degrees():
    a = Subspace(basis=np.eye(8)[:4])
    b = Subspace(basis=np.eye(8)[4:])
    result = principal_angles(a, b)
    assert np.abs(result.angles_deg - 90.0).max() < 1e-9
    assert abs(gait_deviation(result, "sum_angles") - 360.0) < 1e-9
    assert abs(gait_deviation(result, "sum_cosines") - 0.0) < 1e-9


def test_analytic_two_dimensional_case():
    # span{e1, e2} vs span{e1, cos(phi) e2 + sin(phi) e3}: angles {0, phi}
    for phi in (0.1, 0.45, 1.2, np.pi / 2 - 0.01):
        a = Subspace(basis=np.eye(4)[:2])
        row = np.zeros(4)
        row[1], row[2] = np.cos(phi), np.sin(phi)
        b = Subspace(basis=np.vstack([np.eye(4)[0], row]))
        thetas = principal_angles(a, b).thetas
        assert abs(thetas[0] - 0.0) < 1e-9
        assert abs(thetas[1] - phi) < 1e-9


def test_matches_eigen_oracle_and_scipy():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ka, kb = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        # keep d >= ka + kb so random pairs have no forced intersection and
        # arccos stays well conditioned for the oracle comparison
        d = int(rng.integers(ka + kb, 11))
        a = random_subspace(rng, ka, d)
        b = random_subspace(rng, kb, d)
        result = principal_angles(a, b)
        oracle = eigen_oracle_thetas(a.basis, b.basis)[: result.m]
        assert np.abs(np.sort(result.thetas) - np.sort(oracle)).max() < 1e-8
        ref = np.sort(subspace_angles(a.basis.T, b.basis.T))
        assert np.abs(np.sort(result.thetas) - ref).max() < 1e-8


def test_angles_invariant_to_basis_rotation():
    rng = np.random.default_rng(4)
    sub_a = random_subspace(rng, 3, 8)
    sub_b = random_subspace(rng, 3, 8)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    rotated = Subspace(basis=q @ sub_a.basis)
    t1 = principal_angles(sub_a, sub_b).thetas
    t2 = principal_angles(rotated, sub_b).thetas
    assert np.abs(t1 - t2).max() < 1e-9


def test_principal_vector_pairing():
    rng = np.random.default_rng(5)
    a = random_subspace(rng, 3, 9)
    b = random_subspace(rng, 4, 9)
    result = principal_angles(a, b)
    assert result.m == 3
    assert result.left_vectors.shape == (3, 9)
    assert result.right_vectors.shape == (3, 9)
    for i in range(3):
        dot = float(result.left_vectors[i] @ result.right_vectors[i])
        assert abs(dot - result.sigmas[i]) < 1e-9


def test_thetas_sorted_and_clamped():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a = random_subspace(rng, 4, 6)
        b = random_subspace(rng, 4, 6)
        result = principal_angles(a, b)
        assert np.all(np.diff(result.thetas) >= -1e-12)
        assert np.all(result.sigmas <= 1.0) and np.all(result.sigmas >= 0.0)
        assert np.all(result.thetas >= 0.0) and np.all(result.thetas <= np.pi / 2 + 1e-12)


# ---------------------------------------------------------------------------
# deviation measure


def test_deviation_modes_and_errors():
    a = Subspace(basis=np.eye(6)[:3])
    b = Subspace(basis=np.eye(6)[2:5])
    result = principal_angles(a, b)
    # one shared axis, two orthogonal pairs: angles 0, 90, 90
    assert abs(gait_deviation(result, "sum_angles") - 180.0) < 1e-9
    assert abs(gait_deviation(result, "sum_cosines") - 1.0) < 1e-9
    with pytest.raises(ValueError):
        gait_deviation(result, "sum_of_vibes")
    assert set(DEVIATION_MEASURES) == {"sum_angles", "sum_cosines"}


def test_deviation_between_models(participant_model, normative_model):
    value, m = deviation_between(participant_model, normative_model)
    assert m == min(participant_model.n_components, 4)
    assert 0.0 < value < 90.0 * m
    cos_value, m2 = deviation_between(
        participant_model, normative_model, mode="sum_cosines"
    )
    assert m2 == m
    assert 0.0 < cos_value <= m
    # deviation of the normative model against itself is zero
    self_value, m3 = deviation_between(normative_model, normative_model)
    assert m3 == 4
    assert self_value < 1e-6


def test_deviation_csv(tmp_path):
    path = tmp_path / "dev.csv"
    write_deviation_csv(
        [("s1", "sum_angles", 123.456, 3), ("s2", "sum_cosines", 2.5, 4)], path
    )
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "session_id,mode,value,m"
    assert lines[1].startswith("s1,sum_angles,123.456")
    assert lines[2].endswith(",4")

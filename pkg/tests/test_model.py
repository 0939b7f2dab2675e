"""PCA models, sinusoid fitting, and persistence."""

import numpy as np
import pytest

from scomo.errors import FlatSpectrumError, ModelFitError
from scomo.ingest import N_COLUMNS, GaitCycleSet, JointTrajectory
from scomo.model import (
    NORMATIVE_COMPONENTS,
    fit_normative_model,
    fit_participant_model,
    fit_sinusoid,
    load_model,
    model_from_dict,
    model_to_dict,
    reconstruct_normative,
    reconstruct_participant,
    save_model,
    _pca,
)
from tests.conftest import DEVIANT_CONFIG, WalkerConfig, ingest_walker


def rank_k_cycles(variances, t=400, seed=0):
    """Cycle set whose centered data has exactly len(variances) factors.

    Column variances are known by construction, so the explained-variance
    split is an analytic oracle.
    """
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(N_COLUMNS, N_COLUMNS)))
    basis = q[:, : len(variances)].T  # orthonormal rows
    phases = np.linspace(0.0, 2.0 * np.pi, t, endpoint=False)
    scores = np.column_stack(
        [np.sqrt(2.0 * v) * np.sin((i + 1) * phases) for i, v in enumerate(variances)]
    )
    data = 0.8 + scores @ basis
    traj = JointTrajectory(data, 100.0)
    half = t // 2
    return GaitCycleSet(traj, ((0, half), (half, t)), 2, "robotic")


# ---------------------------------------------------------------------------
# PCA core


def test_pca_reconstruction_and_orthonormality():
    cycles = rank_k_cycles([1.0, 0.5, 0.1])
    mean, loadings, scores, evr = _pca(cycles.trajectory.samples)
    assert np.allclose(loadings @ loadings.T, np.eye(N_COLUMNS), atol=1e-10)
    recon = mean + scores @ loadings
    assert np.abs(recon - cycles.trajectory.samples).max() < 1e-9
    # variance ratios match the construction: 1 : 0.5 : 0.1
    assert np.allclose(evr[:3], np.array([1.0, 0.5, 0.1]) / 1.6, atol=1e-6)
    assert np.all(evr[3:] < 1e-12)


def test_pca_sign_convention_is_deterministic():
    cycles = rank_k_cycles([1.0, 0.3])
    _, first, _, _ = _pca(cycles.trajectory.samples)
    for _ in range(5):
        _, again, _, _ = _pca(cycles.trajectory.samples)
        assert np.array_equal(first, again)
    for row in first:
        assert row[np.argmax(np.abs(row))] > 0


def test_participant_component_count_follows_threshold():
    # cumulative explained variance 0.90, 0.98, 1.00 -> threshold 0.95 keeps 2
    cycles = rank_k_cycles([0.90, 0.08, 0.02])
    model = fit_participant_model(cycles, variance_threshold=0.95)
    assert model.n_components == 2
    model = fit_participant_model(cycles, variance_threshold=0.99)
    assert model.n_components == 3
    model = fit_participant_model(cycles, variance_threshold=0.90)
    assert model.n_components == 1


def test_participant_model_validations():
    cycles = rank_k_cycles([1.0], t=40)  # 40 <= 45 columns
    with pytest.raises(ModelFitError, match="more samples than columns"):
        fit_participant_model(cycles)
    with pytest.raises(ModelFitError, match="variance_threshold"):
        fit_participant_model(rank_k_cycles([1.0]), variance_threshold=0.0)


def test_participant_reconstruction_with_full_variance(deviant_recording):
    # noise-free generator data has exactly 4 motion factors, so
    # threshold 1.0 keeps them all and reconstruction is exact
    _, _, cycles = ingest_walker(WalkerConfig(right_ap_gain=1.1, right_delay=2))
    model = fit_participant_model(cycles, variance_threshold=1.0)
    assert model.n_components == 4
    recon = model.mean_posture + reconstruct_participant(model)
    assert np.abs(recon - cycles.trajectory.samples).max() < 1e-9


def test_participant_scores_zero_mean(participant_model):
    assert np.abs(participant_model.scores.mean(axis=0)).max() < 1e-9
    cum = participant_model.explained_variance_ratio[
        : participant_model.n_components
    ].sum()
    assert cum >= 0.95


# ---------------------------------------------------------------------------
# sinusoid fitting


def test_sinusoid_recovers_known_parameters():
    rng = np.random.default_rng(7)
    t = np.arange(600, dtype=float)
    c, omega, phi = 2.3, 0.17, 0.9
    y = c * np.sin(omega * t + phi) + rng.normal(0.0, 0.01 * c, t.size)
    fit = fit_sinusoid(y)
    assert abs(fit.amplitude - c) / c < 0.01
    assert abs(fit.omega - omega) / omega < 0.01
    assert abs(fit.phase - phi) < 0.05
    assert fit.r2 > 0.99


def test_sinusoid_without_phase():
    t = np.arange(500, dtype=float)
    y = 1.5 * np.sin(0.21 * t)
    fit = fit_sinusoid(y, with_phase=False)
    assert fit.phase == 0.0
    assert abs(fit.amplitude - 1.5) < 1e-6
    assert abs(fit.omega - 0.21) < 1e-6
    assert fit.r2 > 1 - 1e-9


def test_sinusoid_rejects_flat_series():
    with pytest.raises(FlatSpectrumError):
        fit_sinusoid(np.zeros(100))
    with pytest.raises(FlatSpectrumError):
        fit_sinusoid(np.full(100, 3.25))


def test_sinusoid_needs_three_periods():
    t = np.arange(200, dtype=float)
    y = np.sin(2.0 * np.pi * 2.0 * t / 200.0)  # 2 periods in the record
    with pytest.raises(ModelFitError, match="need >= 3"):
        fit_sinusoid(y)


def test_sinusoid_evaluate_matches_formula():
    t = np.arange(300, dtype=float)
    y = 0.8 * np.sin(0.3 * t + 1.1)
    fit = fit_sinusoid(y)
    assert np.abs(fit.evaluate(t) - y).max() < 1e-6


# ---------------------------------------------------------------------------
# normative model


def test_normative_model_structure(normative_model):
    nm = normative_model
    assert nm.loadings.shape == (NORMATIVE_COMPONENTS, N_COLUMNS)
    assert np.allclose(
        nm.loadings @ nm.loadings.T, np.eye(NORMATIVE_COMPONENTS), atol=1e-10
    )
    assert len(nm.sinusoids) == NORMATIVE_COMPONENTS
    # pooled generator walking is near-perfectly sinusoidal per component
    assert all(s.r2 > 0.97 for s in nm.sinusoids)
    assert sum(nm.metadata["explained_variance_ratio_4"]) > 0.99
    # score series over time-normalized cycles have period 101 or 101/2
    base = 2.0 * np.pi / 101.0
    for s in nm.sinusoids:
        ratio = s.omega / base
        assert min(abs(ratio - 1.0), abs(ratio - 2.0)) < 0.01


def test_normative_is_invariant_to_subject_translation():
    subjects = [
        ingest_walker(
            WalkerConfig(cycle_samples=96 + 2 * s, h1_scale=1.0 + 0.02 * s)
        )[2]
        for s in range(3)
    ]
    nm1 = fit_normative_model(subjects)
    shifted = []
    for i, cyc in enumerate(subjects):
        samples = cyc.trajectory.samples + (0.5 + 0.1 * i)  # constant offset
        traj = JointTrajectory(samples, cyc.trajectory.rate_hz)
        shifted.append(
            GaitCycleSet(traj, cyc.cycle_bounds, cyc.n_cycles, cyc.side)
        )
    nm2 = fit_normative_model(shifted)
    assert np.abs(nm1.loadings - nm2.loadings).max() < 1e-9


def test_normative_rejects_rank_deficient_pool():
    # h2_scale=0 removes the second harmonic: pooled rank is 2, not 4
    subjects = [
        ingest_walker(WalkerConfig(cycle_samples=100 + 2 * s, h2_scale=0.0))[2]
        for s in range(3)
    ]
    with pytest.raises(ModelFitError, match="fewer than 4"):
        fit_normative_model(subjects)


def test_normative_rejects_empty_and_unknown_pooling():
    with pytest.raises(ModelFitError, match="no subjects"):
        fit_normative_model([])
    subjects = [ingest_walker(WalkerConfig())[2]]
    with pytest.raises(ModelFitError, match="pooling"):
        fit_normative_model(subjects, pooling="mystery")


def test_reconstruct_normative_shape_and_smoothness(normative_model):
    recon = reconstruct_normative(normative_model, 250)
    assert recon.shape == (250, N_COLUMNS)
    # motion components are zero-mean sinusoids: bounded by sum of amplitudes
    bound = sum(
        s.amplitude for s in normative_model.sinusoids
    ) * np.abs(normative_model.loadings).max() * 2
    assert np.abs(recon).max() < bound
    with pytest.raises(ModelFitError):
        reconstruct_normative(normative_model, 0)


# ---------------------------------------------------------------------------
# persistence


def test_participant_round_trip(tmp_path, participant_model):
    doc = model_to_dict(participant_model)
    back = model_from_dict(doc)
    assert np.array_equal(back.loadings, participant_model.loadings)
    assert np.array_equal(back.scores, participant_model.scores)
    assert back.n_components == participant_model.n_components
    path = tmp_path / "pm.json"
    save_model(participant_model, path)
    again = load_model(path)
    assert np.array_equal(again.mean_posture, participant_model.mean_posture)
    assert again.rate_hz == participant_model.rate_hz


def test_normative_round_trip(tmp_path, normative_model):
    path = tmp_path / "nm.json"
    save_model(normative_model, path)
    back = load_model(path)
    assert np.array_equal(back.loadings, normative_model.loadings)
    for a, b in zip(back.sinusoids, normative_model.sinusoids):
        assert (a.amplitude, a.omega, a.phase, a.r2) == (
            b.amplitude,
            b.omega,
            b.phase,
            b.r2,
        )
    assert back.metadata == normative_model.metadata


def test_model_from_dict_rejects_unknown_kind(participant_model):
    doc = model_to_dict(participant_model)
    doc["kind"] = "mystery"
    with pytest.raises(ModelFitError):
        model_from_dict(doc)

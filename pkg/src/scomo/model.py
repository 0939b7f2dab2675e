"""PCA gait models.

Two factorizations of the (t x 45) joint matrix:

* participant model: covariance-eigendecomposition PCA of one subject's
  gait cycles, keeping the smallest number of components that explains
  the requested variance fraction (0.95 by default);
* normative model: 4-component PCA of pooled non-disabled walking whose
  score series are replaced by fitted sinusoids, so the reconstructed
  reference motion is smooth and periodic.

Reconstructions return zero-mean motion components; the mean posture is
added back at blend time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .errors import FlatSpectrumError, ModelFitError
from .ingest import N_COLUMNS, GaitCycleSet

FORMAT_VERSION = 1

NORMATIVE_COMPONENTS = 4

# samples per time-normalized cycle when pooling subjects (0..100% of cycle)
SAMPLES_PER_CYCLE = 101

_ORTHO_TOL = 1e-8


def _check_orthonormal_rows(w: np.ndarray, label: str):
    if w.size == 0:
        return
    gram = w @ w.T
    if not np.allclose(gram, np.eye(w.shape[0]), atol=_ORTHO_TOL):
        raise ModelFitError(f"{label}: loading rows are not orthonormal")


def _apply_sign_convention(loadings: np.ndarray, scores: np.ndarray | None = None):
    """Flip each loading row so its largest-magnitude entry is positive.

    Keeps PCA output deterministic across linear-algebra backends.
    """
    for i in range(loadings.shape[0]):
        j = int(np.argmax(np.abs(loadings[i])))
        if loadings[i, j] < 0:
            loadings[i] = -loadings[i]
            if scores is not None:
                scores[:, i] = -scores[:, i]
    return loadings, scores


def _pca(data: np.ndarray):
    """Full covariance-eigendecomposition PCA of (t, d) data.

    Returns (mean, loadings (d, d) rows descending by variance,
    scores (t, d), explained_variance_ratio (d,)).
    """
    t = data.shape[0]
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (t - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    loadings = eigvecs[:, order].T
    total = eigvals.sum()
    if total <= 0:
        raise ModelFitError("zero total variance in PCA input")
    scores = centered @ loadings.T
    loadings, scores = _apply_sign_convention(loadings, scores)
    return mean, loadings, scores, eigvals / total


@dataclass(frozen=True)
class ParticipantModel:
    """PCA factorization of one participant's gait cycles."""

    mean_posture: np.ndarray        # (45,) average joint positions, meters
    loadings: np.ndarray            # (n, 45) orthonormal rows
    scores: np.ndarray              # (t, n) component scores over time
    explained_variance_ratio: np.ndarray  # (45,) full spectrum
    n_components: int
    t_length: int
    rate_hz: float
    variance_threshold: float = 0.95

    def __post_init__(self):
        _check_orthonormal_rows(self.loadings, "participant model")
        if self.n_components > 0:
            cum = float(np.sum(self.explained_variance_ratio[: self.n_components]))
            if cum < self.variance_threshold - 1e-9:
                raise ModelFitError(
                    f"retained components explain {cum:.4f} < {self.variance_threshold}"
                )
            col_means = self.scores.mean(axis=0)
            if np.max(np.abs(col_means)) > 1e-9:
                raise ModelFitError("score columns are not zero-mean")
        if self.scores.shape != (self.t_length, self.n_components):
            raise ModelFitError("scores shape does not match t_length x n_components")


@dataclass(frozen=True)
class SinusoidFit:
    """Least-squares sinusoid c*sin(omega*t + phi) for one score series."""

    amplitude: float   # score units
    omega: float       # rad/sample
    phase: float       # rad
    r2: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ModelFitError("sinusoid amplitude must be non-negative")
        if not (0.0 <= self.r2 <= 1.0):
            raise ModelFitError("r2 outside [0, 1]")

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        return self.amplitude * np.sin(self.omega * t + self.phase)


@dataclass(frozen=True)
class NormativeModel:
    """4-component normative walking model with sinusoid score series."""

    loadings: np.ndarray                 # (4, 45) orthonormal rows
    sinusoids: tuple                     # 4 SinusoidFit
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.loadings.shape[0] != NORMATIVE_COMPONENTS:
            raise ModelFitError(
                f"normative model must keep exactly {NORMATIVE_COMPONENTS} components"
            )
        _check_orthonormal_rows(self.loadings, "normative model")
        if len(self.sinusoids) != NORMATIVE_COMPONENTS:
            raise ModelFitError("one sinusoid fit required per component")
        for s in self.sinusoids:
            if s.omega <= 0:
                raise ModelFitError("sinusoid frequency must be positive")

    @property
    def fit_r2(self) -> tuple:
        return tuple(s.r2 for s in self.sinusoids)


def fit_participant_model(
    cycles: GaitCycleSet, variance_threshold: float = 0.95
) -> ParticipantModel:
    """Fit the participant PCA from segmented gait cycles.

    Retains the smallest component count whose cumulative explained
    variance reaches variance_threshold.
    """
    data = cycles.trajectory.samples
    t = data.shape[0]
    if t < N_COLUMNS + 1:
        raise ModelFitError(f"need more samples than columns ({t} <= {N_COLUMNS})")
    if not (0.0 < variance_threshold <= 1.0):
        raise ModelFitError("variance_threshold must lie in (0, 1]")
    mean, loadings, scores, evr = _pca(data)
    cum = np.cumsum(evr)
    n = int(np.searchsorted(cum, variance_threshold - 1e-12) + 1)
    n = min(n, N_COLUMNS)
    return ParticipantModel(
        mean_posture=mean,
        loadings=loadings[:n],
        scores=scores[:, :n],
        explained_variance_ratio=evr,
        n_components=n,
        t_length=t,
        rate_hz=cycles.trajectory.rate_hz,
        variance_threshold=variance_threshold,
    )


def reconstruct_participant(model: ParticipantModel) -> np.ndarray:
    """Zero-mean motion component: scores @ loadings, shape (t, 45).

    The mean posture is intentionally not added here; it enters in the
    blend step.
    """
    if model.n_components == 0:
        return np.zeros((model.t_length, N_COLUMNS))
    return model.scores @ model.loadings


def _dominant_bin(y: np.ndarray) -> int:
    spectrum = np.abs(np.fft.rfft(y - y.mean()))
    if spectrum.size < 2:
        raise FlatSpectrumError("series too short for a spectral seed")
    return int(np.argmax(spectrum[1:]) + 1)


def fit_sinusoid(
    scores: np.ndarray, with_phase: bool = True, max_nfev: int = 2000
) -> SinusoidFit:
    """Fit c*sin(omega*t + phi) to a score series, t = 0, 1, 2, ...

    omega is seeded from the dominant discrete-Fourier bin, then refined
    jointly with amplitude and phase by nonlinear least squares. Without
    with_phase the phase is pinned at zero (the strict two-parameter
    form). r2 is clamped to [0, 1].
    """
    y = np.asarray(scores, dtype=float).ravel()
    n = y.size
    sst = float(np.sum((y - y.mean()) ** 2))
    if n < 8 or sst <= 1e-20 * max(1.0, float(np.abs(y).max()) ** 2 * n):
        raise FlatSpectrumError("flat spectrum: no dominant frequency in series")
    k = _dominant_bin(y)
    if k < 3:
        raise ModelFitError(
            f"series covers ~{k} period(s) of its dominant frequency; need >= 3"
        )
    t = np.arange(n, dtype=float)
    omega0 = 2.0 * np.pi * k / n

    # linear seed at fixed omega0: y ~ a*sin(w t) + b*cos(w t)
    basis = np.column_stack([np.sin(omega0 * t), np.cos(omega0 * t)])
    (a, b), *_ = np.linalg.lstsq(basis, y, rcond=None)
    c0 = float(np.hypot(a, b))
    phi0 = float(np.arctan2(b, a))
    if c0 == 0.0:
        c0 = float(np.sqrt(2.0 * sst / n))

    if with_phase:
        def residual(p):
            return p[0] * np.sin(p[1] * t + p[2]) - y

        x0 = [c0, omega0, phi0]
        lower = [0.0, 1e-9, -np.inf]
        upper = [np.inf, np.pi, np.inf]
    else:
        def residual(p):
            return p[0] * np.sin(p[1] * t) - y

        x0 = [c0, omega0]
        lower = [0.0, 1e-9]
        upper = [np.inf, np.pi]

    result = least_squares(
        residual, x0, bounds=(lower, upper), max_nfev=max_nfev, xtol=1e-14, ftol=1e-14
    )
    if not result.success:
        raise ModelFitError("sinusoid fit did not converge")
    c, omega = float(result.x[0]), float(result.x[1])
    phi = float(result.x[2]) if with_phase else 0.0
    phi = float(np.arctan2(np.sin(phi), np.cos(phi)))  # wrap to (-pi, pi]
    sse = float(np.sum(result.fun**2))
    r2 = max(0.0, min(1.0, 1.0 - sse / sst))
    return SinusoidFit(amplitude=c, omega=omega, phase=phi, r2=r2)


def _time_normalize_cycles(cycles: GaitCycleSet, samples_per_cycle: int) -> np.ndarray:
    """Resample each cycle to a fixed length (linear interpolation per column)."""
    blocks = []
    data = cycles.trajectory.samples
    for start, end in cycles.cycle_bounds:
        cycle = data[start:end]
        src = np.linspace(0.0, 1.0, cycle.shape[0])
        dst = np.linspace(0.0, 1.0, samples_per_cycle)
        blocks.append(
            np.column_stack([np.interp(dst, src, cycle[:, j]) for j in range(cycle.shape[1])])
        )
    return np.vstack(blocks)


def fit_normative_model(
    subjects: list[GaitCycleSet],
    pooling: str = "time_normalized_concat",
    samples_per_cycle: int = SAMPLES_PER_CYCLE,
    with_phase: bool = True,
) -> NormativeModel:
    """Fit the 4-component normative model from a multi-subject cycle set.

    Each subject is centered on its own mean posture before pooling, so
    body-size differences do not leak into the motion components. The
    default pooling time-normalizes every cycle to samples_per_cycle
    samples and concatenates; "raw_concat" concatenates cycles as
    recorded.
    """
    if not subjects:
        raise ModelFitError("no subjects to pool")
    if pooling not in ("time_normalized_concat", "raw_concat"):
        raise ModelFitError(f"unknown pooling scheme {pooling!r}")
    blocks = []
    for cycles in subjects:
        if pooling == "time_normalized_concat":
            block = _time_normalize_cycles(cycles, samples_per_cycle)
        else:
            block = cycles.trajectory.samples.copy()
        blocks.append(block - block.mean(axis=0))
    pooled = np.vstack(blocks)
    if pooled.shape[0] <= N_COLUMNS:
        raise ModelFitError("pooled data has too few samples for PCA")
    _, loadings, scores, evr = _pca(pooled)
    nonzero = int(np.sum(evr > 1e-12))
    if nonzero < NORMATIVE_COMPONENTS:
        raise ModelFitError(
            f"fewer than {NORMATIVE_COMPONENTS} components with nonzero variance ({nonzero})"
        )
    sinusoids = tuple(
        fit_sinusoid(scores[:, i], with_phase=with_phase)
        for i in range(NORMATIVE_COMPONENTS)
    )
    metadata = {
        "pooling": pooling,
        "samples_per_cycle": samples_per_cycle if pooling == "time_normalized_concat" else None,
        "n_subjects": len(subjects),
        "with_phase": with_phase,
        "explained_variance_ratio_4": [float(v) for v in evr[:NORMATIVE_COMPONENTS]],
    }
    return NormativeModel(
        loadings=loadings[:NORMATIVE_COMPONENTS],
        sinusoids=sinusoids,
        metadata=metadata,
    )


def reconstruct_normative(model: NormativeModel, t_length: int) -> np.ndarray:
    """Evaluate the sinusoid scores on t = 0..t_length-1 and project back.

    Returns the zero-mean motion component, shape (t_length, 45).
    """
    if t_length < 1:
        raise ModelFitError("t_length must be >= 1")
    t = np.arange(t_length, dtype=float)
    synth_scores = np.column_stack([s.evaluate(t) for s in model.sinusoids])
    return synth_scores @ model.loadings


# ---------------------------------------------------------------------------
# JSON persistence

def _array(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.asarray(a, dtype=float).ravel().tolist()}


def _unarray(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["shape"])


def model_to_dict(model) -> dict:
    """JSON-ready dict for a participant or normative model."""
    if isinstance(model, ParticipantModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "participant",
            "mean_posture": _array(model.mean_posture),
            "loadings": _array(model.loadings),
            "scores": _array(model.scores),
            "explained_variance_ratio": _array(model.explained_variance_ratio),
            "n_components": model.n_components,
            "t_length": model.t_length,
            "rate_hz": model.rate_hz,
            "variance_threshold": model.variance_threshold,
        }
    if isinstance(model, NormativeModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "normative",
            "loadings": _array(model.loadings),
            "sinusoids": [
                {
                    "amplitude": s.amplitude,
                    "omega": s.omega,
                    "phase": s.phase,
                    "r2": s.r2,
                }
                for s in model.sinusoids
            ],
            "units": {"amplitude": "score units", "omega": "rad/sample", "phase": "rad"},
            "metadata": model.metadata,
        }
    raise ModelFitError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict):
    """Inverse of model_to_dict; returns the matching dataclass."""
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFitError(f"unsupported model format_version {version!r}")
    if doc["kind"] == "participant":
        return ParticipantModel(
            mean_posture=_unarray(doc["mean_posture"]),
            loadings=_unarray(doc["loadings"]),
            scores=_unarray(doc["scores"]),
            explained_variance_ratio=_unarray(doc["explained_variance_ratio"]),
            n_components=doc["n_components"],
            t_length=doc["t_length"],
            rate_hz=doc["rate_hz"],
            variance_threshold=doc["variance_threshold"],
        )
    if doc["kind"] == "normative":
        return NormativeModel(
            loadings=_unarray(doc["loadings"]),
            sinusoids=tuple(SinusoidFit(**s) for s in doc["sinusoids"]),
            metadata=doc.get("metadata", {}),
        )
    raise ModelFitError(f"unknown model kind {doc['kind']!r}")


def save_model(model, path):
    """Serialize a participant or normative model to JSON."""
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True))


def load_model(path):
    """Load a model saved by save_model; returns the matching dataclass."""
    return model_from_dict(json.loads(Path(path).read_text()))

"""Subspace comparison between participant and normative gait models.

Each gait model spans a subspace of posture space with its component
loadings. The angles between a participant's subspace and the normative
subspace quantify how far the participant's coordination pattern sits
from normative walking. With row-orthonormal bases Q_p (n_p x 45) and
Q_n (n_n x 45):

    M = Q_p Q_n^T = Y diag(sigma) Z^T,   theta_k = arccos(sigma_k)

theta_k = 0 when a direction is shared, pi/2 when orthogonal. Two
scalar summaries are provided: the sum of angles in degrees (0 means
identical, larger means more deviant) and the sum of cosines (m means
identical, 0 means fully orthogonal).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SubspaceError
from .model import NormativeModel, ParticipantModel

ORTHO_TOL = 1e-10  # max deviation of Q Q^T from identity
RANK_TOL = 1e-10  # QR diagonal magnitude below this means dependent rows

DEVIATION_MEASURES = ("sum_angles", "sum_cosines")


@dataclass(frozen=True)
class Subspace:
    """Row-orthonormal basis (k, d) of a gait model's motion directions."""

    basis: np.ndarray
    label: str = ""

    def __post_init__(self):
        b = self.basis
        if b.ndim != 2:
            raise SubspaceError("basis must be 2-D (components x dims)")
        k, d = b.shape
        if k < 1:
            raise SubspaceError("basis must have at least one component")
        if k > d:
            raise SubspaceError(f"more components ({k}) than dimensions ({d})")
        gram = b @ b.T
        if np.max(np.abs(gram - np.eye(k))) > ORTHO_TOL:
            raise SubspaceError(
                "basis rows are not orthonormal; build with orthonormal_basis"
            )

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def n_dims(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace (basis-independent)."""
        return self.basis.T @ self.basis


def orthonormal_basis(rows: np.ndarray, label: str = "") -> Subspace:
    """Orthonormalize row vectors into a Subspace spanning the same row space.

    Always re-orthonormalizes (QR of the transpose) so accumulated drift
    in stored loadings cannot leak past the Subspace invariant. The signs
    of R's diagonal are folded back into Q, which makes the result
    deterministic and leaves already-orthonormal input unchanged up to
    roundoff.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise SubspaceError("expected a 2-D array of row vectors")
    k, d = rows.shape
    if k < 1 or d < 1:
        raise SubspaceError("empty basis")
    if k > d:
        raise SubspaceError(f"more rows ({k}) than dimensions ({d})")
    q, r = np.linalg.qr(rows.T)  # columns of q span the row space
    diag = np.diag(r)
    if np.any(np.abs(diag) < RANK_TOL):
        raise SubspaceError("rank-deficient basis: rows are linearly dependent")
    q = q * np.sign(diag)[None, :]
    return Subspace(basis=np.ascontiguousarray(q.T), label=label)


@dataclass(frozen=True)
class PrincipalAngleResult:
    """Principal angles and vectors between two subspaces.

    sigmas are the singular values (descending cosines), thetas the
    matching angles in radians (ascending). left_vectors and
    right_vectors hold the paired principal directions in ambient
    coordinates, one per row.
    """

    sigmas: np.ndarray
    thetas: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    participant_label: str = ""
    normative_label: str = ""

    def __post_init__(self):
        s, t = self.sigmas, self.thetas
        if s.shape != t.shape or s.ndim != 1:
            raise SubspaceError("sigmas and thetas must be matching 1-D arrays")
        if np.any(s < -1e-12) or np.any(s > 1.0 + 1e-12):
            raise SubspaceError("singular values must lie in [0, 1]")
        if np.any(np.diff(s) > 1e-12):
            raise SubspaceError("sigmas must be descending")
        if np.any(np.diff(t) < -1e-12):
            raise SubspaceError("thetas must be ascending")

    @property
    def m(self) -> int:
        return self.thetas.shape[0]

    @property
    def angles_rad(self) -> np.ndarray:
        return self.thetas

    @property
    def angles_deg(self) -> np.ndarray:
        return np.degrees(self.thetas)


def principal_angles(a: Subspace, b: Subspace) -> PrincipalAngleResult:
    """Principal angles between two subspaces of the same ambient space."""
    if a.n_dims != b.n_dims:
        raise SubspaceError(
            f"ambient dimensions differ: {a.n_dims} vs {b.n_dims}"
        )
    m = a.basis @ b.basis.T
    y, sigma, zt = np.linalg.svd(m)
    # roundoff can push cosines past 1; clamp before arccos. Cosines within a
    # few ulp of 1 are snapped to exactly 1 so that identical subspaces report
    # angles of exactly zero instead of sqrt(eps)-sized artifacts of arccos.
    sigma = np.clip(sigma, 0.0, 1.0)
    sigma[sigma > 1.0 - 8.0 * np.finfo(float).eps] = 1.0
    k = sigma.shape[0]  # = min(a.k, b.k)
    return PrincipalAngleResult(
        sigmas=sigma,
        thetas=np.arccos(sigma),
        left_vectors=y[:, :k].T @ a.basis,
        right_vectors=zt[:k, :] @ b.basis,
        participant_label=a.label,
        normative_label=b.label,
    )


def gait_deviation(result: PrincipalAngleResult, mode: str = "sum_angles") -> float:
    """Scalar summary of a set of principal angles.

    sum_angles: sum of angles in degrees; 0 = identical subspaces and
    larger values mean greater deviation from normative walking.
    sum_cosines: sum of cos(theta_k) = sum of sigmas; m = identical,
    0 = fully orthogonal (larger = more similar).
    """
    if mode not in DEVIATION_MEASURES:
        raise SubspaceError(
            f"unknown deviation mode {mode!r}; expected one of {DEVIATION_MEASURES}"
        )
    if mode == "sum_angles":
        return float(np.sum(result.angles_deg))
    return float(np.sum(np.cos(result.thetas)))


def deviation_between(
    pm: ParticipantModel,
    nm: NormativeModel,
    mode: str = "sum_angles",
) -> tuple:
    """Deviation between fitted models; returns (value, m).

    m = min(participant components, normative components) angles enter
    the sum; m is reported alongside the value since participants may
    retain more or fewer components than the normative model's 4.
    """
    a = orthonormal_basis(pm.loadings, label="participant")
    b = orthonormal_basis(nm.loadings, label="normative")
    result = principal_angles(a, b)
    return gait_deviation(result, mode=mode), result.m


def write_deviation_csv(rows, path):
    """Deviation report: one (session_id, mode, value, m) row per session."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("session_id", "mode", "value", "m"))
        for session_id, mode, value, m in rows:
            writer.writerow((session_id, mode, f"{value:.9g}", m))

"""Trend statistics across practice sessions.

The practice-trend model is a Gaussian random-intercept linear mixed
model

    y_ij = b0 + b1 * session_ij + u_i + e_ij
    u_i ~ N(0, sigma_b^2),  e_ij ~ N(0, sigma_w^2)

fit by maximum likelihood, profiling out the fixed effects and the
within variance so only the variance ratio lam = sigma_b^2 / sigma_w^2
needs a 1-D search. With V_i = I + lam * 11^T the profiled objective is

    f(lam) = N * log(RSS_V(lam)) + sum_i log(1 + lam * n_i)

minimized over a log-spaced grid refined by golden-section search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .errors import StatsError

LAMBDA_GRID_POINTS = 64
LAMBDA_LO, LAMBDA_HI = 1e-8, 1e8
GOLDEN_TOL = 1e-10  # relative interval width in log space
GOLDEN_MAX_ITER = 200


@dataclass(frozen=True)
class MixedModelFit:
    """Random-intercept fit; sigma fields are standard deviations."""

    fixed_intercept: float
    fixed_slope: float
    random_intercepts: dict  # participant label -> BLUP deviation
    sigma_between: float
    sigma_within: float
    t_stat: float
    p_value: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma_between < 0 or self.sigma_within < 0:
            raise StatsError("variance components must be nonnegative")
        u = np.array(list(self.random_intercepts.values()), dtype=float)
        scale = max(1.0, float(np.abs(u).sum()))
        if abs(float(u.sum())) > 1e-6 * scale:
            raise StatsError("random intercepts must sum to zero")

    def report_json(self) -> str:
        return json.dumps(
            {
                "fixed_intercept": self.fixed_intercept,
                "fixed_slope": self.fixed_slope,
                "random_intercepts": {
                    str(k): v for k, v in self.random_intercepts.items()
                },
                "sigma_between": self.sigma_between,
                "sigma_within": self.sigma_within,
                "t_stat": self.t_stat,
                "p_value": self.p_value,
                "metadata": self.metadata,
            },
            sort_keys=True,
        )


def _group_sums(y, x, starts, counts, lam):
    """GLS building blocks for block-diagonal V_i = I + lam * 11^T."""
    a = np.zeros((2, 2))
    b = np.zeros(2)
    for s, n in zip(starts, counts):
        sl = slice(s, s + n)
        xi = np.column_stack([np.ones(n), x[sl]])
        yi = y[sl]
        w = lam / (1.0 + lam * n)
        xt1 = xi.sum(axis=0)
        a += xi.T @ xi - w * np.outer(xt1, xt1)
        b += xi.T @ yi - w * xt1 * yi.sum()
    return a, b


def _profile_objective(lam, y, x, starts, counts):
    """Profiled -2 log likelihood up to an additive constant."""
    a, b = _group_sums(y, x, starts, counts, lam)
    try:
        beta = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        raise StatsError("singular design: session covariate is constant")
    rss = 0.0
    logdet = 0.0
    n_total = y.shape[0]
    for s, n in zip(starts, counts):
        sl = slice(s, s + n)
        r = y[sl] - beta[0] - beta[1] * x[sl]
        w = lam / (1.0 + lam * n)
        rs = r.sum()
        rss += float(r @ r) - w * rs * rs
        logdet += math.log1p(lam * n)
    if rss <= 0:
        rss = np.finfo(float).tiny  # perfect fit; keep the log finite
    return n_total * math.log(rss) + logdet, beta, rss, a


def _golden_section(fun, lo, hi, tol, max_iter):
    """Minimize a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    it = 0
    while (b - a) > tol * max(1.0, abs(a) + abs(b)) and it < max_iter:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
        it += 1
    return (c, fc, it) if fc < fd else (d, fd, it)


def fit_random_intercept(y, session, participant) -> MixedModelFit:
    """ML fit of a random-intercept practice-trend model.

    y, session, participant are aligned sequences: the response, the
    numeric session index (fixed effect), and a participant label per
    observation (random effect). Requires at least 2 participants and 3
    observations per participant.
    """
    y = np.asarray(list(y), dtype=float)
    x = np.asarray(list(session), dtype=float)
    labels = list(participant)
    if not (y.shape[0] == x.shape[0] == len(labels)):
        raise StatsError("y, session, participant must have equal lengths")

    # stable-sort observations into contiguous per-participant blocks
    order_of = {}
    for lab in labels:
        if lab not in order_of:
            order_of[lab] = len(order_of)
    groups = list(order_of)
    if len(groups) < 2:
        raise StatsError("need at least 2 participants")
    idx = np.argsort([order_of[lab] for lab in labels], kind="stable")
    y, x = y[idx], x[idx]
    counts = np.array(
        [sum(1 for lab in labels if lab == g) for g in groups], dtype=int
    )
    if counts.min() < 3:
        raise StatsError("need at least 3 observations per participant")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    if np.ptp(x) == 0:
        raise StatsError("singular design: session covariate is constant")

    def f(log_lam):
        return _profile_objective(math.exp(log_lam), y, x, starts, counts)[0]

    log_grid = np.linspace(math.log(LAMBDA_LO), math.log(LAMBDA_HI), LAMBDA_GRID_POINTS)
    grid_vals = np.array([f(g) for g in log_grid])
    if not np.all(np.isfinite(grid_vals)):
        raise StatsError("likelihood evaluation failed to converge")
    k = int(np.argmin(grid_vals))
    lo = log_grid[max(k - 1, 0)]
    hi = log_grid[min(k + 1, LAMBDA_GRID_POINTS - 1)]
    log_best, f_best, iters = _golden_section(f, lo, hi, GOLDEN_TOL, GOLDEN_MAX_ITER)
    if grid_vals[k] < f_best:
        log_best, f_best = log_grid[k], grid_vals[k]
    lam = math.exp(log_best)

    # a boundary fit at the smallest grid lambda means no between variance
    f0, beta0, rss0, a0 = _profile_objective(0.0, y, x, starts, counts)
    if f0 <= f_best:
        lam, f_best = 0.0, f0
        beta, rss, a = beta0, rss0, a0
    else:
        _, beta, rss, a = _profile_objective(lam, y, x, starts, counts)

    n_total = y.shape[0]
    sigma_w2 = rss / n_total
    sigma_b2 = lam * sigma_w2

    u = {}
    for g, s, n in zip(groups, starts, counts):
        r = y[s : s + n] - beta[0] - beta[1] * x[s : s + n]
        u[g] = float(lam * r.sum() / (1.0 + lam * n))

    cov_beta = sigma_w2 * np.linalg.inv(a)
    se_slope = math.sqrt(max(cov_beta[1, 1], 0.0))
    if se_slope == 0.0:
        raise StatsError("degenerate fit: zero slope standard error")
    t_stat = beta[1] / se_slope
    df = n_total - 2 - (len(groups) - 1)
    p_value = float(2.0 * sstats.t.sf(abs(t_stat), df)) if df >= 1 else float("nan")

    return MixedModelFit(
        fixed_intercept=float(beta[0]),
        fixed_slope=float(beta[1]),
        random_intercepts=u,
        sigma_between=math.sqrt(sigma_b2),
        sigma_within=math.sqrt(sigma_w2),
        t_stat=float(t_stat),
        p_value=p_value,
        metadata={
            "method": "ML (profiled variance ratio, grid + golden section)",
            "iterations": int(iters),
            "converged": True,
            "lambda": lam,
            "se_slope": se_slope,
            "df": int(df),
            "n_observations": int(n_total),
            "n_participants": len(groups),
            "p_value_note": "t distribution with N - 2 - (groups - 1) df",
        },
    )


def profile_objective_at(lam, y, session, participant) -> float:
    """Profiled objective value at a given variance ratio (for diagnostics)."""
    y = np.asarray(list(y), dtype=float)
    x = np.asarray(list(session), dtype=float)
    labels = list(participant)
    order_of = {}
    for lab in labels:
        if lab not in order_of:
            order_of[lab] = len(order_of)
    idx = np.argsort([order_of[lab] for lab in labels], kind="stable")
    y, x = y[idx], x[idx]
    counts = np.array(
        [sum(1 for lab in labels if lab == g) for g in order_of], dtype=int
    )
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return _profile_objective(lam, y, x, starts, counts)[0]


@dataclass(frozen=True)
class SelectionSummary:
    """Mean and spread of repeated gait selections at one viewing angle."""

    mean_scomo: float
    sd_scomo: float
    n_repeats: int
    view: str

    def __post_init__(self):
        if self.sd_scomo < 0:
            raise StatsError("standard deviation must be nonnegative")
        if self.n_repeats < 2:
            raise StatsError("insufficient repeats")


def summarize_selections(selections, view: str) -> SelectionSummary:
    """Mean and sample standard deviation of repeated selections."""
    vals = np.asarray(list(selections), dtype=float)
    if vals.shape[0] < 2:
        raise StatsError("insufficient repeats: need at least 2 selections")
    return SelectionSummary(
        mean_scomo=float(vals.mean()),
        sd_scomo=float(vals.std(ddof=1)),
        n_repeats=int(vals.shape[0]),
        view=view,
    )

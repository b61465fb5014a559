"""Monte Carlo layer: trajectory ensembles and their statistics.

Trajectories are sampled under the reference measure of the driving noise
(independent Gaussian paths), propagated in raw form, and normalized only
when moments are read off.  Ensemble averages come in two flavours:

``measure="physical"``
    Each trajectory is weighted by the squared norm of its raw state, the
    Born weight that a measuring device sees.  Classical laws (ballistic
    mean position, inverse-square-root mass scaling of the spread of the
    trajectory means) hold under this measure and only under it.

``measure="reference"``
    Flat weights over the sampled paths.  Kept for diagnostics; the mean
    position under this measure provably lags the classical value because
    high-norm trajectories are exactly the ones dragged furthest along the
    initial momentum.

Weights are formed per sample time with a log-sum-exp shift, so long
horizons degrade gracefully into a small effective sample size instead of
overflowing.  The per-time effective sample size 1/sum(w_i^2) is reported
alongside the statistics; treat results with ESS of a few dozen or less
as unresolved.

The position spread of the normalized state is noise independent, so it is
reported once per sample time rather than per trajectory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    InvalidGridError,
    InvalidParameterError,
    PhysicalParams,
    TimeGrid,
    make_grid,
)
from .kernels import f_exponential, f_markovian, h_exponential_batch
from .noise import sample_exponential_noise_batch
from .propagator import GaussianState

_MEASURES = ("physical", "reference")

# Ensembles re-solve the kernel pair at every sample horizon for every
# trajectory, so the default grid is coarser than the single-shot one.
_DEFAULT_NODES = 513


@dataclass(frozen=True)
class TrajectoryRecord:
    """Moment curves of one noise realization.

    ``log_norm_sq`` is the log squared norm of the raw state, the quantity
    whose exponential weights this trajectory in physical-measure averages.
    """

    master_seed: int
    trajectory_index: int
    times: np.ndarray
    mean_position: np.ndarray
    mean_momentum: np.ndarray
    sigma_position: np.ndarray
    log_norm_sq: np.ndarray

    def to_csv(self) -> str:
        lines = ["t,mean_q,mean_p,sigma,log_norm_sq"]
        for k in range(self.times.size):
            lines.append(
                "%.17g,%.17g,%.17g,%.17g,%.17g"
                % (
                    self.times[k],
                    self.mean_position[k],
                    self.mean_momentum[k],
                    self.sigma_position[k],
                    self.log_norm_sq[k],
                )
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EnsembleStats:
    """Per-sample-time aggregates over an ensemble of trajectories.

    ``v_q`` is the dispersion of the per-trajectory mean positions,
    sqrt(weighted mean of squared deviations), population convention.
    ``ess`` is the effective sample size implied by the weights; under the
    reference measure it equals ``n_traj`` up to rounding.
    """

    times: np.ndarray
    mean_q: np.ndarray
    se_q: np.ndarray
    mean_p: np.ndarray
    se_p: np.ndarray
    v_q: np.ndarray
    se_vq: np.ndarray
    sigma_q: np.ndarray
    ess: np.ndarray
    n_traj: int
    master_seed: int
    measure: str

    def to_csv(self) -> str:
        lines = ["t,mean_q,se_q,mean_p,se_p,Vq,sigma,se_vq,ess"]
        for k in range(self.times.size):
            lines.append(
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g"
                % (
                    self.times[k],
                    self.mean_q[k],
                    self.se_q[k],
                    self.mean_p[k],
                    self.se_p[k],
                    self.v_q[k],
                    self.sigma_q[k],
                    self.se_vq[k],
                    self.ess[k],
                )
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "times": self.times.tolist(),
            "mean_q": self.mean_q.tolist(),
            "se_q": self.se_q.tolist(),
            "mean_p": self.mean_p.tolist(),
            "se_p": self.se_p.tolist(),
            "Vq": self.v_q.tolist(),
            "se_vq": self.se_vq.tolist(),
            "sigma": self.sigma_q.tolist(),
            "ess": self.ess.tolist(),
            "n_traj": self.n_traj,
            "master_seed": self.master_seed,
            "measure": self.measure,
        }
        return json.dumps(payload, sort_keys=True)


def _sample_node_indices(grid: TimeGrid, n_times: int, log_times: bool) -> np.ndarray:
    """Pick n_times node indices in (0, t_max], linearly or log spaced.

    Indices are snapped to the grid and deduplicated, so the result may be
    shorter than requested on coarse grids.
    """
    if not 1 <= n_times <= grid.n - 1:
        raise InvalidGridError(
            f"n_times {n_times} outside [1, {grid.n - 1}] for this grid"
        )
    if log_times:
        targets = np.geomspace(grid.dt, grid.t_max, n_times)
    else:
        targets = np.linspace(grid.dt, grid.t_max, n_times)
    idx = np.rint(targets / grid.dt).astype(int)
    return np.unique(np.clip(idx, 1, grid.n - 1))


def _snap_indices(grid: TimeGrid, t_samples) -> np.ndarray:
    """Map requested sample times to grid node indices, strictly validated."""
    ts = np.asarray(t_samples, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise InvalidGridError("t_samples must be a nonempty 1-D sequence")
    if not np.all(np.diff(ts) > 0.0):
        raise InvalidGridError("t_samples must be strictly increasing")
    if ts[0] <= 0.0:
        raise InvalidGridError("t_samples must be positive")
    if ts[-1] > grid.t_max * (1.0 + 1e-12):
        raise InvalidGridError(
            f"t_samples exceed the grid horizon {grid.t_max!r}"
        )
    idx = np.clip(np.rint(ts / grid.dt).astype(int), 1, grid.n - 1)
    if np.unique(idx).size != idx.size:
        raise InvalidGridError("t_samples collide after snapping to the grid")
    return idx


def _moment_curves(
    params: PhysicalParams,
    gamma: float,
    grid: TimeGrid,
    w: np.ndarray,
    idx: np.ndarray,
    state0: GaussianState,
):
    """Normalized-state moments and log norms at the given node indices.

    ``w`` has shape (n_traj, grid.n).  Returns (q, p, sigma, log_norm_sq)
    where q, p, log_norm_sq have shape (n_traj, len(idx)) and sigma has
    shape (len(idx),); sigma is noise independent.
    """
    mu = 1j * params.m / (2.0 * params.hbar)
    half_sl = 0.5 * math.sqrt(params.lam)
    alpha0 = state0.alpha
    beta0 = state0.beta
    g0 = state0.g

    n_traj = w.shape[0]
    n_out = idx.size
    q = np.empty((n_traj, n_out))
    p = np.empty((n_traj, n_out))
    log_norm_sq = np.empty((n_traj, n_out))
    sigma = np.empty(n_out)

    for j, k in enumerate(int(k) for k in idx):
        sub = grid.prefix(k + 1)
        t = sub.t_max
        if math.isinf(gamma):
            f = f_markovian(t, params, sub)
        else:
            f = f_exponential(t, params, gamma, sub)
        wk = w[:, : k + 1]
        hv, h_d0, h_dt = h_exponential_batch(t, params, gamma, sub, wk)

        trap = np.full(k + 1, sub.dt)
        trap[0] *= 0.5
        trap[-1] *= 0.5
        int_f = (wk * f.values) @ trap
        int_f_rev = (wk * f.values[::-1]) @ trap
        int_h = (hv * wk) @ trap

        A = mu * f.d_start
        B = 2.0 * mu * f.d_end
        # det = A^2 - B^2/4 in factored endpoint form; the naive difference
        # cancels catastrophically in SI-scale regimes.
        det = mu * mu * f.endpoint_sum() * f.endpoint_diff()
        C = -mu * h_d0 + half_sl * int_f
        D = mu * h_dt + half_sl * int_f_rev
        E = half_sl * int_h

        denom = alpha0 + A
        alpha_t = (alpha0 * A + det) / denom
        ar = alpha_t.real
        if not ar > 0.0:
            raise InvalidParameterError(
                f"propagated state not normalizable at t={t!r}"
            )
        shift = C + beta0
        beta_t = D + B * shift / (2.0 * denom)
        g_t = g0 + E + shift * shift / (4.0 * denom)

        br = beta_t.real
        q[:, j] = br / (2.0 * ar)
        p[:, j] = params.hbar * (beta_t.imag - alpha_t.imag * br / ar)
        log_norm_sq[:, j] = (
            2.0 * g_t.real
            + br * br / (2.0 * ar)
            + 0.5 * math.log(math.pi / (2.0 * ar))
        )
        sigma[j] = 0.5 / math.sqrt(ar)

    return q, p, sigma, log_norm_sq


def _normalized_weights(log_norm_sq_col: np.ndarray, measure: str) -> np.ndarray:
    if measure == "reference":
        n = log_norm_sq_col.size
        return np.full(n, 1.0 / n)
    shifted = log_norm_sq_col - log_norm_sq_col.max()
    wts = np.exp(shifted)
    return wts / wts.sum()


def run_trajectory(
    params: PhysicalParams,
    gamma: float,
    state0: GaussianState,
    t_samples,
    seed: int,
    *,
    grid: TimeGrid | None = None,
    trajectory_index: int = 0,
) -> TrajectoryRecord:
    """Propagate a single noise realization and record its moment curves.

    The realization is the one an ensemble with the same master seed would
    assign to ``trajectory_index``; the record reproduces that ensemble row
    up to elementwise rounding.  Sample times are snapped to the master
    grid so every horizon sees a prefix of one fixed noise path.
    """
    if grid is None:
        grid = make_grid(float(np.max(np.asarray(t_samples, dtype=float))), _DEFAULT_NODES)
    idx = _snap_indices(grid, t_samples)
    w = sample_exponential_noise_batch(gamma, grid, seed, [trajectory_index])
    q, p, sigma, log_norm_sq = _moment_curves(params, gamma, grid, w, idx, state0)
    return TrajectoryRecord(
        master_seed=seed,
        trajectory_index=trajectory_index,
        times=grid.nodes()[idx],
        mean_position=q[0],
        mean_momentum=p[0],
        sigma_position=sigma,
        log_norm_sq=log_norm_sq[0],
    )


def run_ensemble(
    params: PhysicalParams,
    gamma: float,
    state0: GaussianState,
    t_samples,
    n_traj: int,
    master_seed: int,
    *,
    grid: TimeGrid | None = None,
    measure: str = "physical",
) -> EnsembleStats:
    """Aggregate moment statistics over ``n_traj`` independent realizations.

    Trajectory i draws its path from the counter-based stream
    (master_seed, i), so results are independent of evaluation order and
    identical across batch sizes up to elementwise rounding.  A state that
    fails to normalize does so for every trajectory at once (the quadratic
    coefficient is noise independent), so that error aborts the run rather
    than producing a partial report.
    """
    if measure not in _MEASURES:
        raise InvalidParameterError(
            f"measure must be one of {_MEASURES}, got {measure!r}"
        )
    if n_traj < 1:
        raise InvalidParameterError(f"n_traj must be >= 1, got {n_traj}")
    if grid is None:
        grid = make_grid(float(np.max(np.asarray(t_samples, dtype=float))), _DEFAULT_NODES)
    idx = _snap_indices(grid, t_samples)
    w = sample_exponential_noise_batch(gamma, grid, master_seed, range(n_traj))
    q, p, sigma, log_norm_sq = _moment_curves(params, gamma, grid, w, idx, state0)

    n_out = idx.size
    mean_q = np.empty(n_out)
    se_q = np.empty(n_out)
    mean_p = np.empty(n_out)
    se_p = np.empty(n_out)
    v_q = np.empty(n_out)
    se_vq = np.empty(n_out)
    ess = np.empty(n_out)

    for j in range(n_out):
        wts = _normalized_weights(log_norm_sq[:, j], measure)
        ess[j] = 1.0 / np.sum(wts * wts)

        mean_q[j] = wts @ q[:, j]
        dq = q[:, j] - mean_q[j]
        se_q[j] = math.sqrt(np.sum((wts * dq) ** 2))

        mean_p[j] = wts @ p[:, j]
        dp = p[:, j] - mean_p[j]
        se_p[j] = math.sqrt(np.sum((wts * dp) ** 2))

        v2 = wts @ (dq * dq)
        v_q[j] = math.sqrt(v2)
        if v_q[j] > 0.0:
            se_v2 = math.sqrt(np.sum((wts * (dq * dq - v2)) ** 2))
            se_vq[j] = 0.5 * se_v2 / v_q[j]
        else:
            se_vq[j] = 0.0

    return EnsembleStats(
        times=grid.nodes()[idx],
        mean_q=mean_q,
        se_q=se_q,
        mean_p=mean_p,
        se_p=se_p,
        v_q=v_q,
        se_vq=se_vq,
        sigma_q=sigma,
        ess=ess,
        n_traj=n_traj,
        master_seed=master_seed,
        measure=measure,
    )

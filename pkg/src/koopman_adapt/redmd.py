"""Recursive EDMD: rank-one RLS-style updates of the lifted model with
exponential forgetting, plus the three stabilizing extensions — update
gating on windowed prediction accuracy, a variable forgetting factor driven
by the output error, and constant-trace covariance bounding.

With forgetting factor 1, an exact-Gram covariance init, and the gate held
open, the recursion reproduces the batch EDMD fit on the union of all data;
that equivalence is the module's central correctness oracle.
"""

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .edmd import KoopmanModel, SnapshotSet, _as_input, fit
from .errors import CovarianceNotPD, DimensionMismatch, RankDeficientRegressor
from .matops import COND_LIMIT, pinv_svd
from .observables import ObservableDictionary

# Lower bound on the windowed output-error variance, keeping Sigma0 > 0.
SIGMA_FLOOR = 1e-8


@dataclass
class RedmdSettings:
    """Tuning constants for the recursive estimator.

    eps_low/eps_high are the windowed-prediction-error gate thresholds in
    per-state-scaled units; an update runs only while the window error is at
    least eps_low, and the adaptation sensitivity is boosted by mu_sigma for
    steps where it also reaches eps_high. state_scales normalizes each state
    row of the error window before the max-abs norm (mixed units would
    otherwise let one state dominate).

    trace_max_factor bounds the covariance trace at that multiple of the
    initial trace; use inf to disable. gamma_init is either "data" (inverse
    of the initial regressor Gram) or a float delta for delta * I.
    adaptive_lambda turns the variable forgetting factor off, holding the
    factor at lambda0 (fixed-forgetting operation).
    """

    lambda0: float = 1.0
    lambda_min: float = 0.9
    m_op: int = 50
    eps_low: float = 1e-3
    eps_high: float = 1e-2
    n0: float = 100.0
    mu_sigma: float = 10.0
    trace_max_factor: float = 10.0
    gamma_init: float | str = "data"
    state_scales: Sequence[float] | None = None
    adaptive_lambda: bool = True
    check_spd: bool = False

    def __post_init__(self):
        if not 0.0 < self.lambda_min <= 1.0:
            raise ValueError(f"lambda_min must be in (0, 1], got {self.lambda_min}")
        if not 0.0 < self.lambda0 <= 1.0:
            raise ValueError(f"lambda0 must be in (0, 1], got {self.lambda0}")
        if self.m_op < 2:
            raise ValueError(f"m_op must be >= 2, got {self.m_op}")
        if self.eps_low < 0 or self.eps_high < self.eps_low:
            raise ValueError("need 0 <= eps_low <= eps_high")
        if self.n0 <= 0 or self.mu_sigma <= 1.0:
            raise ValueError("need n0 > 0 and mu_sigma > 1")
        if self.trace_max_factor <= 0:
            raise ValueError("trace_max_factor must be positive (inf disables)")
        if isinstance(self.gamma_init, str) and self.gamma_init != "data":
            raise ValueError(
                f"gamma_init must be 'data' or a positive float, got "
                f"{self.gamma_init!r}")


@dataclass(frozen=True)
class StepReport:
    """Per-sample diagnostics emitted by RecursiveEstimator.step."""

    updated: bool
    lam: float
    trace_gamma: float
    e_post: float
    window_error: float


def variable_forgetting_factor(sigma0: float, phi_gamma: float,
                               e_post: float, lambda_min: float = 0.0) -> float:
    """Next forgetting factor 1 - (1 - phi_gamma) * e_post^2 / sigma0,
    clamped to [lambda_min, 1]."""
    if sigma0 <= 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    lam = 1.0 - (1.0 - phi_gamma) * (e_post * e_post) / sigma0
    return min(1.0, max(lambda_min, lam))


class RecursiveEstimator:
    """Online estimator of the lifted model (K, B) with covariance Gamma.

    Single-writer: step() mutates internal state and must be serialized per
    estimator. Model snapshots handed to consumers are copies.
    """

    def __init__(self, theta0: np.ndarray, gamma0: np.ndarray,
                 dictionary: ObservableDictionary,
                 settings: RedmdSettings | None = None, dt: float = 1.0):
        settings = settings if settings is not None else RedmdSettings()
        N = dictionary.size
        theta0 = np.asarray(theta0, dtype=float)
        gamma0 = np.asarray(gamma0, dtype=float)
        if theta0.ndim != 2 or theta0.shape[0] != N:
            raise DimensionMismatch(
                f"theta0 must be ({N}, N+p), got {theta0.shape}")
        q = theta0.shape[1]
        if gamma0.shape != (q, q):
            raise DimensionMismatch(
                f"gamma0 must be ({q}, {q}), got {gamma0.shape}")
        self.dictionary = dictionary
        self.settings = settings
        self.dt = dt
        self.theta = theta0.copy()
        self.Gamma = (gamma0 + gamma0.T) / 2.0
        self.lam = settings.lambda0
        self.sigma_e = SIGMA_FLOOR
        self.Sigma0 = SIGMA_FLOOR * settings.n0
        self.trace_max = settings.trace_max_factor * float(np.trace(self.Gamma))
        self.updated_last_step = False
        scales = (np.ones(dictionary.n) if settings.state_scales is None
                  else np.asarray(settings.state_scales, dtype=float))
        if scales.shape != (dictionary.n,) or (scales <= 0).any():
            raise ValueError("state_scales must be positive, one per state")
        self._scales = scales
        self._x_buf: deque = deque(maxlen=settings.m_op)
        self._u_buf: deque = deque(maxlen=settings.m_op)
        self._err_buf: deque = deque(maxlen=settings.m_op)

    # -- views ------------------------------------------------------------

    @property
    def size(self) -> int:
        return self.dictionary.size

    @property
    def p(self) -> int:
        return self.theta.shape[1] - self.dictionary.size

    @property
    def K(self) -> np.ndarray:
        return self.theta[:, : self.size]

    @property
    def B(self) -> np.ndarray:
        return self.theta[:, self.size:]

    @property
    def model(self) -> KoopmanModel:
        """A by-value snapshot of the current model."""
        return KoopmanModel(self.K.copy(), self.B.copy(), self.dictionary,
                            self.dt)

    def regressor(self, x, u=None) -> np.ndarray:
        """The stacked vector [lift(x); u]."""
        return np.concatenate([self.dictionary.lift(x), _as_input(u, self.p)])

    # -- core recursions ----------------------------------------------------

    def correction_vector(self, phi: np.ndarray) -> np.ndarray:
        """Row vector phi^T Gamma / (phi^T Gamma phi + lambda), shape (N+p,)."""
        gp = self.Gamma @ phi
        denom = float(phi @ gp) + self.lam
        if not math.isfinite(denom) or denom <= 0.0:
            raise CovarianceNotPD(
                f"correction denominator {denom} is not positive; covariance "
                "recursion has broken down")
        return gp / denom

    def apply_update(self, phi: np.ndarray, psi_next: np.ndarray,
                     gamma: np.ndarray | None = None):
        """Rank-one model update; returns (model snapshot, innovation)."""
        if gamma is None:
            gamma = self.correction_vector(phi)
        innovation = self._update_theta(phi, psi_next, gamma)
        return self.model, innovation

    def _update_theta(self, phi, psi_next, gamma) -> np.ndarray:
        innovation = psi_next - self.theta @ phi
        self.theta += np.outer(innovation, gamma)
        return innovation

    def update_covariance(self, phi: np.ndarray) -> np.ndarray:
        """Covariance downdate (Gamma - (Gamma phi) gamma) / lambda, symmetrized."""
        gp = self.Gamma @ phi
        denom = float(phi @ gp) + self.lam
        if not math.isfinite(denom) or denom <= 0.0:
            raise CovarianceNotPD(
                f"covariance denominator {denom} is not positive")
        self._downdate_gamma(gp, denom)
        return self.Gamma

    def _downdate_gamma(self, gp, denom) -> None:
        G = (self.Gamma - np.outer(gp, gp) / denom) / self.lam
        self.Gamma = (G + G.T) / 2.0
        t = float(np.trace(self.Gamma))
        if not math.isfinite(t):
            raise CovarianceNotPD("covariance trace is not finite")
        if self.settings.check_spd:
            try:
                np.linalg.cholesky(self.Gamma)
            except np.linalg.LinAlgError as exc:
                raise CovarianceNotPD(
                    "covariance lost positive definiteness") from exc

    def enforce_trace_bound(self) -> np.ndarray:
        """Scale Gamma down to the trace bound when it is exceeded."""
        t = float(np.trace(self.Gamma))
        if t > self.trace_max:
            self.Gamma = self.Gamma * (self.trace_max / t)
        return self.Gamma

    # -- gating and forgetting ----------------------------------------------

    def prediction_error_window(self) -> float:
        """Max scaled one-step prediction error over the sample buffer.

        Returns +inf while the buffer holds fewer than m_op samples
        (warm-up sentinel). Each prediction lifts the measured state.
        """
        if len(self._x_buf) < self.settings.m_op:
            return math.inf
        Xb = np.stack(self._x_buf, axis=1)
        Psi = self.dictionary.lift_batch(Xb[:, :-1])
        pred = self.K @ Psi
        if self.p:
            Ub = np.stack(self._u_buf, axis=1)
            pred = pred + self.B @ Ub[:, :-1]
        err = (Xb[:, 1:] - pred[: self.dictionary.n]) / self._scales[:, None]
        return float(np.abs(err).max())

    def update_lambda(self, phi: np.ndarray, e_post: float,
                      sigma_boost: float = 1.0) -> float:
        """Recompute Sigma0 from the windowed error variance and set the
        next forgetting factor."""
        gp = self.Gamma @ phi
        q = float(phi @ gp)
        phi_gamma = q / (q + self.lam)
        return self._set_lambda(phi_gamma, e_post, sigma_boost)

    def _set_lambda(self, phi_gamma, e_post, sigma_boost) -> float:
        if len(self._err_buf) >= 2:
            self.sigma_e = max(float(np.var(self._err_buf, ddof=1)), SIGMA_FLOOR)
        else:
            self.sigma_e = SIGMA_FLOOR
        self.Sigma0 = self.sigma_e * self.settings.n0 * sigma_boost
        self.lam = variable_forgetting_factor(
            self.Sigma0, phi_gamma, e_post, self.settings.lambda_min)
        return self.lam

    # -- the per-sample algorithm ---------------------------------------------

    def step(self, x, u, x_next) -> StepReport:
        """Consume one transition (x, u, x_next) and run the gated update.

        During warm-up (buffer not yet full) the update runs unconditionally
        with the initial forgetting factor; afterwards it runs only when the
        windowed prediction error reaches eps_low, with the trace bound
        enforced and the sensitivity boost applied per the thresholds.
        """
        s = self.settings
        phi = self.regressor(x, u)
        psi_next = self.dictionary.lift(np.asarray(x_next, dtype=float))
        self._x_buf.append(np.asarray(x, dtype=float).copy())
        if self.p:
            self._u_buf.append(_as_input(u, self.p).copy())
        warm_up = len(self._x_buf) < s.m_op
        if warm_up:
            window_error = math.inf
            do_update = True
        else:
            window_error = self.prediction_error_window()
            do_update = window_error >= s.eps_low
        e_post = math.nan
        if do_update:
            sigma_boost = 1.0
            if not warm_up:
                self.enforce_trace_bound()
                if window_error >= s.eps_high:
                    sigma_boost = s.mu_sigma
            gp = self.Gamma @ phi
            q = float(phi @ gp)
            denom = q + self.lam
            if not math.isfinite(denom) or denom <= 0.0:
                raise CovarianceNotPD(
                    f"correction denominator {denom} is not positive")
            gamma = gp / denom
            innovation = self._update_theta(phi, psi_next, gamma)
            self._downdate_gamma(gp, denom)
            self.enforce_trace_bound()
            # posterior output error: innovation scaled by lambda / denom
            oi = self.dictionary.output_index
            e_post = float(innovation[oi]) * (self.lam / denom)
            self._err_buf.append(e_post)
            if not warm_up and s.adaptive_lambda:
                self._set_lambda(q / denom, e_post, sigma_boost)
        self.updated_last_step = do_update
        return StepReport(do_update, self.lam, float(np.trace(self.Gamma)),
                          e_post, window_error)


def init_from_batch(snapshots: SnapshotSet, dictionary: ObservableDictionary,
                    settings: RedmdSettings | None = None) -> RecursiveEstimator:
    """Initialize the estimator from an offline batch fit.

    The covariance starts at the inverse of the initial regressor Gram
    (gamma_init="data") or at delta * I when a float delta was configured;
    in the latter case a rank-deficient batch fit falls back to the SVD
    pseudo-inverse instead of failing.
    """
    settings = settings if settings is not None else RedmdSettings()
    PsiX = dictionary.lift_batch(snapshots.X)
    G = np.vstack([PsiX, snapshots.U])
    diagonal_init = not isinstance(settings.gamma_init, str)
    try:
        model = fit(snapshots, dictionary)
    except RankDeficientRegressor:
        if not diagonal_init:
            raise
        KB = dictionary.lift_batch(snapshots.Xp) @ pinv_svd(G)
        N = dictionary.size
        model = KoopmanModel(KB[:, :N].copy(), KB[:, N:].copy(), dictionary,
                             snapshots.dt)
    theta0 = np.hstack([model.K, model.B])
    if diagonal_init:
        delta = float(settings.gamma_init)
        if delta <= 0:
            raise ValueError(f"gamma_init must be positive, got {delta}")
        gamma0 = delta * np.eye(G.shape[0])
    else:
        gram = G @ G.T
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise RankDeficientRegressor(
                f"initial Gram condition estimate {cond:.3e} exceeds "
                f"{COND_LIMIT:.1e}; request diagonal init or add data",
                cond=cond)
        gamma0 = np.linalg.inv(gram)
    return RecursiveEstimator(theta0, gamma0, dictionary, settings,
                              dt=snapshots.dt)

"""Receding-horizon tracking controller on the lifted linear model.

The finite-horizon problem is condensed into a dense quadratic in the
stacked input sequence: cost on the projected (state-space) predictions
against the reference window plus an input effort term. Unconstrained
problems are solved exactly via the normal equations; box-constrained ones
by projected gradient with a fixed 1/L step.
"""

from dataclasses import dataclass

import numpy as np

from .edmd import KoopmanModel
from .errors import DimensionMismatch, IllConditionedHessian

HESSIAN_COND_LIMIT = 1e12


@dataclass
class MpcConfig:
    """Horizon, weights, and box bounds for the tracking controller.

    Qy weights the projected state tracking error (n x n), Ru the input
    effort (p x p, positive definite). The terminal tracking block is scaled
    by terminal_weight. u_min/u_max are per-channel bounds; None leaves the
    problem unconstrained.
    """

    horizon: int
    Qy: np.ndarray
    Ru: np.ndarray
    terminal_weight: float = 1.0
    u_min: np.ndarray | None = None
    u_max: np.ndarray | None = None
    max_pg_iters: int = 200
    pg_tol: float = 1e-8

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        self.Qy = np.atleast_2d(np.asarray(self.Qy, dtype=float))
        self.Ru = np.atleast_2d(np.asarray(self.Ru, dtype=float))
        if self.terminal_weight <= 0:
            raise ValueError("terminal_weight must be positive")
        if np.linalg.eigvalsh(self.Ru).min() <= 0:
            raise ValueError("Ru must be positive definite")
        for name in ("u_min", "u_max"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.atleast_1d(np.asarray(v, dtype=float)))
        if (self.u_min is not None and self.u_max is not None
                and (self.u_min > self.u_max).any()):
            raise ValueError("u_min must be <= u_max elementwise")

    @property
    def constrained(self) -> bool:
        return self.u_min is not None or self.u_max is not None


def build_prediction_matrices(model: KoopmanModel, horizon: int):
    """Stacked maps (S_psi, S_u) with lifted predictions
    Psi_{1..H} = S_psi @ psi0 + S_u @ vec(u_0..u_{H-1}).

    S_psi stacks the powers K^i; S_u is lower block-triangular Toeplitz
    with blocks K^{i-1-j} B.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    N, p = model.size, model.p
    powers = [np.eye(N)]
    for _ in range(horizon):
        powers.append(model.K @ powers[-1])
    S_psi = np.vstack(powers[1:])
    S_u = np.zeros((horizon * N, horizon * p))
    for i in range(1, horizon + 1):
        for j in range(i):
            S_u[(i - 1) * N: i * N, j * p: (j + 1) * p] = (
                powers[i - 1 - j] @ model.B)
    return S_psi, S_u


class CondensedMpc:
    """Condensed tracking QP for one model; reusable across solves.

    Building the condensation costs O(H^2 (N+p)^2); each solve is then a
    dense (H p) back-substitution, so the harness constructs one of these
    per model update rather than per sample.
    """

    def __init__(self, model: KoopmanModel, cfg: MpcConfig):
        n = model.dictionary.n
        p = model.p
        H = cfg.horizon
        if cfg.Qy.shape != (n, n):
            raise DimensionMismatch(
                f"Qy must be ({n}, {n}), got {cfg.Qy.shape}")
        if cfg.Ru.shape != (p, p):
            raise DimensionMismatch(
                f"Ru must be ({p}, {p}), got {cfg.Ru.shape}")
        self.model = model
        self.cfg = cfg
        S_psi, S_u = build_prediction_matrices(model, H)
        # project the stacked lifted predictions onto the first n coordinates
        N = model.size
        rows = (np.arange(H)[:, None] * N + np.arange(n)[None, :]).ravel()
        self.F = S_psi[rows]          # (H n, N)
        self.G = S_u[rows]            # (H n, H p)
        weights = [cfg.Qy] * (H - 1) + [cfg.terminal_weight * cfg.Qy]
        Qbar = _block_diag(weights)
        Rbar = _block_diag([cfg.Ru] * H)
        self.GtQ = self.G.T @ Qbar
        self.hessian = 2.0 * (self.GtQ @ self.G + Rbar)
        cond = np.linalg.cond(self.hessian)
        if not np.isfinite(cond) or cond > HESSIAN_COND_LIMIT:
            raise IllConditionedHessian(
                f"condensed Hessian condition {cond:.3e} exceeds "
                f"{HESSIAN_COND_LIMIT:.1e}; revisit weights or horizon")
        self._lipschitz = None

    def _step_size(self) -> float:
        if self._lipschitz is None:
            self._lipschitz = 1.01 * _spectral_norm(self.hessian)
        return 1.0 / self._lipschitz

    def solve(self, psi0, w_window, return_info: bool = False):
        """Minimize the condensed objective for the current lifted state
        against an (n, H) reference window; returns (u0, U_plan)."""
        cfg = self.cfg
        n = self.model.dictionary.n
        p = self.model.p
        H = cfg.horizon
        psi0 = np.asarray(psi0, dtype=float)
        w_window = np.asarray(w_window, dtype=float)
        if psi0.shape != (self.model.size,):
            raise DimensionMismatch(
                f"psi0 must be ({self.model.size},), got {psi0.shape}")
        if w_window.shape != (n, H):
            raise DimensionMismatch(
                f"reference window must be ({n}, {H}), got {w_window.shape}")
        f0 = self.F @ psi0 - w_window.T.ravel()
        grad0 = 2.0 * (self.GtQ @ f0)
        U = np.linalg.solve(self.hessian, -grad0)
        info = {"pg_iterations": 0, "pg_objectives": []}
        if cfg.constrained:
            U = self._project(U)
            U, pg_info = self._projected_gradient(U, grad0)
            info.update(pg_info)
        plan = U.reshape(H, p).T
        return (plan[:, 0].copy(), plan, info) if return_info \
            else (plan[:, 0].copy(), plan)

    def _project(self, U):
        cfg = self.cfg
        p, H = self.model.p, cfg.horizon
        plan = U.reshape(H, p)
        lo = -np.inf if cfg.u_min is None else cfg.u_min
        hi = np.inf if cfg.u_max is None else cfg.u_max
        return np.clip(plan, lo, hi).ravel()

    def _projected_gradient(self, U, grad0):
        cfg = self.cfg
        step = self._step_size()
        objectives = []
        iters = 0
        for iters in range(1, cfg.max_pg_iters + 1):
            grad = self.hessian @ U + grad0
            objectives.append(0.5 * float(U @ self.hessian @ U) + float(grad0 @ U))
            U_next = self._project(U - step * grad)
            if np.max(np.abs(U_next - U)) <= cfg.pg_tol:
                U = U_next
                break
            U = U_next
        objectives.append(0.5 * float(U @ self.hessian @ U) + float(grad0 @ U))
        return U, {"pg_iterations": iters, "pg_objectives": objectives}


def solve_mpc(model: KoopmanModel, cfg: MpcConfig, psi0, w_window):
    """One-shot receding-horizon solve; returns (u0, U_plan)."""
    return CondensedMpc(model, cfg).solve(psi0, w_window)


def mpc_gain_limit(model: KoopmanModel, cfg: MpcConfig) -> np.ndarray:
    """The implicit linear feedback u0 = -G @ psi realized by the
    unconstrained controller at zero reference, column by column."""
    if cfg.constrained:
        raise ValueError("gain extraction requires an unconstrained config")
    solver = CondensedMpc(model, cfg)
    N = model.size
    n = model.dictionary.n
    w_zero = np.zeros((n, cfg.horizon))
    G = np.empty((model.p, N))
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        u0, _ = solver.solve(e, w_zero)
        G[:, i] = -u0
    return G


def _block_diag(blocks) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r: r + b.shape[0], c: c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def _spectral_norm(A, tol: float = 1e-12, max_iter: int = 500) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    rng = np.random.default_rng(A.shape[0])
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        lam_new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam

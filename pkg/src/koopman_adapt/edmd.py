"""Offline EDMD-with-control: snapshot handling, the batch least-squares fit
of the lifted transition and input matrices, and open-loop prediction.

The batch fit doubles as the brute-force oracle against which the recursive
estimator is verified.
"""

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    RankDeficientRegressor,
    SingularGram,
    TooFewSamples,
)
from .matops import pinv_full_row_rank
from .observables import ObservableDictionary


def _as_input(u, p: int | None = None) -> np.ndarray:
    """Normalize an input sample: None means no input channels."""
    if u is None:
        u = np.zeros(0)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if p is not None and u.shape != (p,):
        raise DimensionMismatch(f"expected input of shape ({p},), got {u.shape}")
    return u


@dataclass(frozen=True)
class SnapshotSet:
    """Paired state/successor/input snapshot matrices.

    X and Xp are (n, M-1); column j of Xp is the successor of column j of X.
    U is (p, M-1); p may be zero for autonomous data.
    """

    X: np.ndarray
    Xp: np.ndarray
    U: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        if self.X.ndim != 2 or self.Xp.ndim != 2 or self.U.ndim != 2:
            raise DimensionMismatch("snapshot matrices must be 2-D")
        if self.X.shape != self.Xp.shape:
            raise DimensionMismatch(
                f"X {self.X.shape} and Xp {self.Xp.shape} must match")
        if self.U.shape[1] != self.X.shape[1]:
            raise DimensionMismatch(
                f"U has {self.U.shape[1]} columns, X has {self.X.shape[1]}")
        if self.X.shape[1] < 1:
            raise TooFewSamples("need at least one snapshot pair")
        for name in ("X", "Xp", "U"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} contains NaN or Inf")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.U.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.X.shape[1]


def collect_snapshots(trajectory: Sequence, dt: float = 1.0) -> SnapshotSet:
    """Build a SnapshotSet from a sequence of (x_k, u_k) samples.

    The final input is unused (only M-1 transitions exist in M samples).
    """
    if len(trajectory) < 2:
        raise TooFewSamples(
            f"need at least 2 samples to form a snapshot pair, got {len(trajectory)}")
    xs = [np.asarray(x, dtype=float) for x, _ in trajectory]
    us = [_as_input(u) for _, u in trajectory]
    X = np.column_stack(xs[:-1])
    Xp = np.column_stack(xs[1:])
    U = (np.column_stack(us[:-1]) if us[0].size
         else np.zeros((0, len(us) - 1)))
    return SnapshotSet(X, Xp, U, dt)


def merge_snapshots(sets: Iterable[SnapshotSet]) -> SnapshotSet:
    """Horizontally stack snapshot sets (no cross-trajectory pairs)."""
    sets = list(sets)
    if not sets:
        raise TooFewSamples("no snapshot sets to merge")
    first = sets[0]
    return SnapshotSet(
        np.hstack([s.X for s in sets]),
        np.hstack([s.Xp for s in sets]),
        np.hstack([s.U for s in sets]),
        first.dt,
    )


@dataclass(frozen=True)
class KoopmanModel:
    """The lifted linear predictor: psi_next = K @ psi + B @ u."""

    K: np.ndarray
    B: np.ndarray
    dictionary: ObservableDictionary
    dt: float = 1.0

    def __post_init__(self):
        N = self.dictionary.size
        if self.K.shape != (N, N):
            raise DimensionMismatch(
                f"K must be ({N}, {N}), got {self.K.shape}")
        if self.B.ndim != 2 or self.B.shape[0] != N:
            raise DimensionMismatch(
                f"B must be ({N}, p), got {self.B.shape}")
        if not (np.isfinite(self.K).all() and np.isfinite(self.B).all()):
            raise ValueError("model matrices contain NaN or Inf")

    @property
    def size(self) -> int:
        return self.K.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def advance(self, psi: np.ndarray, u=None) -> np.ndarray:
        """One lifted-space step K @ psi + B @ u."""
        u = _as_input(u, self.p)
        return self.K @ psi + self.B @ u


def fit(snapshots: SnapshotSet, dictionary: ObservableDictionary,
        ridge: float = 0.0) -> KoopmanModel:
    """Least-squares fit of (K, B) on lifted snapshots.

    Solves ``[K, B] = lift(Xp) @ pinv([lift(X); U])`` using the
    full-row-rank pseudo-inverse. With ``ridge > 0`` the Gram matrix is
    regularized instead and the rank requirement is waived.

    Raises
    ------
    RankDeficientRegressor
        If the stacked regressor is not (numerically) full row rank and no
        ridge was requested.
    """
    if snapshots.n != dictionary.n:
        raise DimensionMismatch(
            f"snapshot state dimension {snapshots.n} != dictionary n "
            f"{dictionary.n}")
    PsiX = dictionary.lift_batch(snapshots.X)
    PsiXp = dictionary.lift_batch(snapshots.Xp)
    G = np.vstack([PsiX, snapshots.U])
    if ridge > 0.0:
        gram = G @ G.T + ridge * np.eye(G.shape[0])
        KB = np.linalg.solve(gram, G @ PsiXp.T).T
    else:
        try:
            KB = PsiXp @ pinv_full_row_rank(G)
        except SingularGram as exc:
            cond = np.linalg.cond(G @ G.T)
            raise RankDeficientRegressor(
                f"stacked regressor [lift(X); U] is rank deficient "
                f"(Gram condition estimate {cond:.3e}); add data or set a "
                f"ridge term", cond=cond) from exc
    N = dictionary.size
    return KoopmanModel(KB[:, :N].copy(), KB[:, N:].copy(), dictionary,
                        snapshots.dt)


def predict_one(model: KoopmanModel, x, u=None) -> np.ndarray:
    """Predicted lifted successor of a state: K @ lift(x) + B @ u."""
    return model.advance(model.dictionary.lift(x), u)


def rollout(model: KoopmanModel, x0, U, mode: str = "lifted") -> np.ndarray:
    """Open-loop prediction of H states from x0 under inputs U (p, H).

    ``lifted`` iterates entirely in lifted space and projects each step;
    ``relift`` projects to state space and re-lifts between steps.
    """
    if mode not in ("lifted", "relift"):
        raise ValueError(f"mode must be 'lifted' or 'relift', got {mode!r}")
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != model.p:
        raise DimensionMismatch(
            f"inputs must be ({model.p}, H), got {U.shape}")
    H = U.shape[1]
    if H < 1:
        raise ValueError("horizon must be >= 1")
    d = model.dictionary
    out = np.empty((d.n, H))
    if mode == "lifted":
        psi = d.lift(np.asarray(x0, dtype=float))
        for k in range(H):
            psi = model.advance(psi, U[:, k])
            out[:, k] = psi[: d.n]
    else:
        x = np.asarray(x0, dtype=float)
        for k in range(H):
            x = model.advance(d.lift(x), U[:, k])[: d.n]
            out[:, k] = x
    return out


def write_trajectory_csv(path, t, X, U) -> None:
    """Write one trajectory as CSV with columns t, x1..xn, u1..up."""
    t = np.asarray(t, dtype=float)
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    n, m = X.shape
    if t.shape != (m,) or U.shape[1] != m:
        raise DimensionMismatch("t, X, U must share the sample count")
    header = (["t"] + [f"x{i + 1}" for i in range(n)]
              + [f"u{j + 1}" for j in range(U.shape[0])])
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(m):
            row = [t[k], *X[:, k], *U[:, k]]
            writer.writerow([f"{v:.17g}" for v in row])


def read_trajectory_csv(path):
    """Read a trajectory CSV back into (t, X, U) arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows or header[0] != "t":
        raise ValueError(f"{path} is not a trajectory CSV (expected 't' column)")
    n = sum(1 for name in header if name.startswith("x"))
    p = sum(1 for name in header if name.startswith("u"))
    data = np.asarray(rows, dtype=float).T
    t = data[0]
    X = data[1:1 + n]
    U = data[1 + n:1 + n + p]
    return t, X, U


def snapshots_from_trajectory_csv(path, dictionary_n: int | None = None) -> SnapshotSet:
    """Load a trajectory CSV and convert it to a SnapshotSet."""
    t, X, U = read_trajectory_csv(path)
    if dictionary_n is not None and X.shape[0] != dictionary_n:
        raise DimensionMismatch(
            f"trajectory has {X.shape[0]} states, expected {dictionary_n}")
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    pairs = [(X[:, k], U[:, k]) for k in range(X.shape[1])]
    return collect_snapshots(pairs, dt)

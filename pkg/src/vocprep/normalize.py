"""Dataset-level feature normalization: centering, standardization, ZCA.

Feature matrices are plain ``(n, d)`` float64 arrays, one flattened image per
row. Statistics are fitted per feature position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EigenNoConvergence, TooFewSamples

KINDS = ("mean", "standardize", "zca")
STD_FLOOR = 1e-8
DEFAULT_EPSILON = 1e-2
MAX_ZCA_DIM = 3072
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def _round_robin(d: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings for one cyclic sweep: d - 1 rounds (d even) of disjoint pairs.

    Circle-method tournament schedule; every unordered pair (p, q) appears in
    exactly one round. Odd ``d`` gets a bye slot that is dropped.
    """
    m = d + (d % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p < d and q < d:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def jacobi_eigh(c: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the rotations of one round touch disjoint index pairs and can be
    applied together. Iterates until the off-diagonal Frobenius norm drops
    below ``tol * |trace|``.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as columns.
    """
    a = np.array(c, dtype=np.float64)
    d = a.shape[0]
    if a.shape != (d, d):
        raise ValueError("matrix must be square")
    a = (a + a.T) / 2
    vt = np.eye(d)  # eigenvectors as rows
    limit = tol * abs(float(np.trace(a)))
    rounds = _round_robin(d)
    converged = _off_norm(a) <= limit
    sweeps = 0
    while not converged:
        if sweeps >= max_sweeps:
            raise EigenNoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        for p, q in rounds:
            if p.size == 0:
                continue
            apq = a[p, q]
            # rotations on negligible entries only add round-off
            active = np.abs(apq) > 1e-300 + 1e-18 * np.sqrt(np.abs(a[p, p] * a[q, q]))
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            cs = 1.0 / np.sqrt(1.0 + t * t)
            sn = t * cs
            # A <- J^T A J: rotate rows, then rows of the transpose
            for _ in range(2):
                rp, rq = a[p], a[q]
                a[p], a[q] = cs[:, None] * rp - sn[:, None] * rq, sn[:, None] * rp + cs[:, None] * rq
                a = np.ascontiguousarray(a.T)
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = vt[p], vt[q]
            vt[p], vt[q] = cs[:, None] * vp - sn[:, None] * vq, sn[:, None] * vp + cs[:, None] * vq
        sweeps += 1
        converged = _off_norm(a) <= limit
    evals = np.diag(a).copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], vt[order].T


@dataclass
class NormModel:
    kind: str
    mean: np.ndarray
    std: np.ndarray | None = None
    W: np.ndarray | None = None
    epsilon: float = 0.0
    eigenvalues: np.ndarray | None = field(default=None, repr=False)
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "epsilon": float(self.epsilon), "mean": self.mean.tolist()}
        if self.std is not None:
            out["std"] = self.std.tolist()
        if self.W is not None:
            out["W"] = self.W.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> NormModel:
        def arr(key):
            return None if data.get(key) is None else np.asarray(data[key], dtype=np.float64)

        return cls(data["kind"], arr("mean"), arr("std"), arr("W"), float(data.get("epsilon", 0.0)))

    def __eq__(self, other):
        if not isinstance(other, NormModel):
            return NotImplemented

        def same(x, y):
            return (x is None and y is None) or (x is not None and y is not None and np.array_equal(x, y))

        return (
            self.kind == other.kind
            and self.epsilon == other.epsilon
            and same(self.mean, other.mean)
            and same(self.std, other.std)
            and same(self.W, other.W)
        )


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise DimensionMismatch(f"feature matrix must be 2-D with n, d >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("feature matrix contains non-finite values")
    return x


def fit(kind: str, x, epsilon: float = DEFAULT_EPSILON) -> NormModel:
    if kind not in KINDS:
        raise ValueError(f"unknown normalization kind {kind!r}")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    x = _as_matrix(x)
    n, d = x.shape
    if kind != "mean" and n < 2:
        raise TooFewSamples(f"{kind} needs at least 2 samples, got {n}")
    mean = x.mean(axis=0)
    if kind == "mean":
        return NormModel("mean", mean)
    if kind == "standardize":
        std = np.maximum(x.std(axis=0, ddof=1), STD_FLOOR)
        return NormModel("standardize", mean, std=std)
    if d > MAX_ZCA_DIM:
        raise DimensionMismatch(f"ZCA limited to d <= {MAX_ZCA_DIM}, got {d}")
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    evals, evecs = jacobi_eigh(cov)
    if epsilon == 0 and evals[0] <= 0:
        raise TooFewSamples("covariance is singular; ZCA with epsilon=0 needs full-rank data")
    # tiny negative eigenvalues are round-off on a PSD matrix
    scale = 1.0 / np.sqrt(np.maximum(evals, 0.0) + epsilon)
    w = (evecs * scale) @ evecs.T
    return NormModel("zca", mean, W=w, epsilon=float(epsilon), eigenvalues=evals, eigenvectors=evecs)


def apply(model: NormModel, x) -> np.ndarray:
    x = _as_matrix(x)
    if x.shape[1] != model.dim:
        raise DimensionMismatch(f"model expects d={model.dim}, got {x.shape[1]}")
    xc = x - model.mean
    if model.kind == "mean":
        return xc
    if model.kind == "standardize":
        return xc / model.std
    return xc @ model.W.T

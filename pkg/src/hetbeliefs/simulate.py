"""Seeded path generation: latent state, dividends, per-agent filters,
innovations, and projected log-density paths.

Truth is configurable: "p0" makes the state a standard Brownian motion,
an agent index k makes it the mean-reverting process that agent believes
in.  Agents never see the hidden components; they are carried on each
bundle for diagnostics only.  The projected density is integrated in log
form (positivity is structural), Euler on the log SDE:

    d log lamhat = -(b11 x + C'xhat) dx - 1/2 (b11 x + C'xhat)^2 dt.

Randomness comes from one counter-based stream per (seed, path index);
see the rng module for the fixed draw layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.linalg as sla

from .errors import ValidationError
from .model import AgentBelief, MarketParams
from .filtering import filter_coefficients
from .rng import chunk_size, path_generator


@dataclass
class SimConfig:
    """One simulation request.

    truth is "p0" or a 1-based agent index.  hidden0 fixes the initial
    hidden truth; None draws it from the truth-measure stationary law
    conditioned on x0 (OU truth) or uses zeros (p0).  xhat0 is the filter
    start, zeros by default, one row per agent if 2-d.
    """

    truth: str | int = "p0"
    t_end: float = 1.0
    dt: float = 1e-3
    n_paths: int = 1
    seed: int = 0
    x0: float = 0.0
    hidden0: np.ndarray | None = None
    xhat0: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if self.t_end < self.dt:
            raise ValidationError(f"t_end must be >= dt, got {self.t_end} < {self.dt}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValidationError(f"n_paths must be an integer >= 1, got {self.n_paths}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed}")
        if not (self.truth == "p0" or (isinstance(self.truth, int) and self.truth >= 1)):
            raise ValidationError(f"truth must be 'p0' or a 1-based agent index, got {self.truth!r}")
        self.n_paths = int(self.n_paths)
        self.seed = int(self.seed)
        if self.hidden0 is not None:
            self.hidden0 = np.asarray(self.hidden0, dtype=float)
        if self.xhat0 is not None:
            self.xhat0 = np.asarray(self.xhat0, dtype=float)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def dt_effective(self) -> float:
        """Actual grid step; equals dt whenever t_end is a multiple of dt."""
        return self.t_end / self.n_steps

    @classmethod
    def from_doc(cls, doc: dict | None) -> "SimConfig":
        doc = doc or {}
        truth = doc.get("truth", "p0")
        if isinstance(truth, float) and truth.is_integer():
            truth = int(truth)
        return cls(
            truth=truth,
            t_end=float(doc.get("t_end", 1.0)),
            dt=float(doc.get("dt", 1e-3)),
            n_paths=int(doc.get("n_paths", 1)),
            seed=int(doc.get("seed", 0)),
            x0=float(doc.get("x0", 0.0)),
            hidden0=None if doc.get("hidden0") is None else np.asarray(doc["hidden0"], float),
            xhat0=None if doc.get("xhat0") is None else np.asarray(doc["xhat0"], float),
        )


@dataclass
class PathBundle:
    """One simulated scenario on a uniform grid.

    hidden is the ground-truth hidden path, not observable by agents.
    Per-agent lists are ordered like the beliefs list passed to
    simulate_truth.
    """

    times: np.ndarray
    x: np.ndarray
    hidden: np.ndarray
    dividends: np.ndarray
    xhat: list[np.ndarray] = field(default_factory=list)
    N: list[np.ndarray] = field(default_factory=list)
    loglambdahat: list[np.ndarray] = field(default_factory=list)
    seed: int = 0
    path_index: int = 0


def _cols_matvec(M: np.ndarray, X: np.ndarray) -> np.ndarray:
    """X @ M.T via explicit column accumulation.

    Fixed accumulation order regardless of the number of rows in X, so
    chunked and single-path runs produce identical bits.  Intended for
    tiny M (state dimensions).
    """
    P = X.shape[0]
    r, k = M.shape
    out = np.zeros((P, r))
    for i in range(r):
        acc = out[:, i]
        for kk in range(k):
            acc += M[i, kk] * X[:, kk]
    return out


def _cols_dot(v: np.ndarray, X: np.ndarray) -> np.ndarray:
    """X @ v via explicit column accumulation (same rationale as _cols_matvec)."""
    out = np.zeros(X.shape[0])
    for kk in range(v.shape[0]):
        out += v[kk] * X[:, kk]
    return out


def stationary_conditional(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hidden-state stationary law conditioned on the observed component.

    For the stable process dX = -B X dt + dW the stationary covariance
    solves B S + S B' = I.  Returns (slope, L) with conditional mean
    slope * x0 and conditional covariance L L'.
    """
    n = B.shape[0]
    Sigma = sla.solve_continuous_lyapunov(B, np.eye(n))
    slope = Sigma[1:, 0] / Sigma[0, 0]
    S0 = Sigma[1:, 1:] - np.outer(Sigma[1:, 0], Sigma[0, 1:]) / Sigma[0, 0]
    S0 = 0.5 * (S0 + S0.T)
    try:
        L = np.linalg.cholesky(S0)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(S0)
        L = U @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    return slope, L


def _agent_coeffs(beliefs: list[AgentBelief]):
    coeffs = []
    for j, b in enumerate(beliefs):
        if b.Vtilde is None:
            raise ValidationError(
                f"agent {j + 1}: stationary covariance not attached (run prepare_beliefs)"
            )
        K1, K2, K3 = filter_coefficients(b.decomp, b.Vtilde)
        coeffs.append((b.decomp.b11, b.decomp.C, K1, K2, K3))
    return coeffs


def _xhat0_matrix(cfg: SimConfig, J: int, m: int) -> np.ndarray:
    if cfg.xhat0 is None:
        return np.zeros((J, m))
    x0 = np.asarray(cfg.xhat0, dtype=float)
    if x0.ndim == 1:
        if x0.shape[0] != m:
            raise ValidationError(f"xhat0 must have length n-1 = {m}, got {x0.shape[0]}")
        return np.tile(x0, (J, 1))
    if x0.shape != (J, m):
        raise ValidationError(f"xhat0 must be (J, n-1) = ({J}, {m}), got {x0.shape}")
    return x0.copy()


def simulate_truth(cfg: SimConfig, params: MarketParams,
                   beliefs: list[AgentBelief]) -> Iterator[PathBundle]:
    """Stream of simulated bundles, reproducible given (seed, config).

    All agents' filters are advanced with their own decomposition and
    stationary covariance against the shared observed increment stream.
    """
    n, m, J = params.n, params.n - 1, params.J
    if isinstance(cfg.truth, int) and not 1 <= cfg.truth <= J:
        raise ValidationError(f"truth agent index {cfg.truth} out of range 1..{J}")
    if cfg.hidden0 is not None and cfg.hidden0.shape != (m,):
        raise ValidationError(f"hidden0 must have length n-1 = {m}")

    agent_coeffs = _agent_coeffs(beliefs)
    B_truth = None if cfg.truth == "p0" else beliefs[cfg.truth - 1].B

    S = cfg.n_steps
    dt = cfg.dt_effective
    sdt = np.sqrt(dt)
    times = np.arange(S + 1) * dt
    xhat0 = _xhat0_matrix(cfg, J, m)

    draw_init = cfg.hidden0 is None and B_truth is not None
    if draw_init:
        slope, L0 = stationary_conditional(B_truth)

    chunk = min(1024, chunk_size(S, n))
    for lo in range(0, cfg.n_paths, chunk):
        hi = min(lo + chunk, cfg.n_paths)
        P = hi - lo

        xi = np.empty((P, S, n))
        hidden_init = np.empty((P, m))
        for p in range(P):
            gen = path_generator(cfg.seed, lo + p)
            if draw_init:
                hidden_init[p] = slope * cfg.x0 + L0 @ gen.standard_normal(m)
            elif cfg.hidden0 is not None:
                hidden_init[p] = cfg.hidden0
            else:
                hidden_init[p] = 0.0
            xi[p] = gen.standard_normal((S, n))

        xs = np.empty((P, S + 1))
        hid = np.empty((P, S + 1, m))
        xhat = np.empty((J, P, S + 1, m))
        Ns = np.zeros((J, P, S + 1))
        ll = np.zeros((J, P, S + 1))

        X = np.empty((P, n))
        X[:, 0] = cfg.x0
        X[:, 1:] = hidden_init
        xh = [np.tile(xhat0[j], (P, 1)) for j in range(J)]

        for s in range(S):
            xs[:, s] = X[:, 0]
            hid[:, s] = X[:, 1:]
            for j in range(J):
                xhat[j, :, s] = xh[j]

            if B_truth is None:
                Xn = X + sdt * xi[:, s, :]
            else:
                Xn = X - dt * _cols_matvec(B_truth, X) + sdt * xi[:, s, :]
            dx = Xn[:, 0] - X[:, 0]

            for j, (b11, C, K1, K2, K3) in enumerate(agent_coeffs):
                g = b11 * X[:, 0] + _cols_dot(C, xh[j])
                ll[j, :, s + 1] = ll[j, :, s] + (-g * dx - (0.5 * dt) * (g * g))
                Ns[j, :, s + 1] = Ns[j, :, s] + (dx + g * dt)
                xh[j] = xh[j] + dt * (X[:, 0][:, None] * K1 + _cols_matvec(K2, xh[j])) \
                    + dx[:, None] * K3
            X = Xn

        xs[:, S] = X[:, 0]
        hid[:, S] = X[:, 1:]
        for j in range(J):
            xhat[j, :, S] = xh[j]

        for p in range(P):
            yield PathBundle(
                times=times.copy(),
                x=xs[p].copy(),
                hidden=hid[p].copy(),
                dividends=params.a0 + params.sigma * xs[p],
                xhat=[xhat[j, p].copy() for j in range(J)],
                N=[Ns[j, p].copy() for j in range(J)],
                loglambdahat=[ll[j, p].copy() for j in range(J)],
                seed=cfg.seed,
                path_index=lo + p,
            )


def lambda_hat_path(bundle: PathBundle, belief: AgentBelief, agent_index: int = 0) -> np.ndarray:
    """Log projected-density path recomputed from the bundle's observables.

    Starts at 0 (density 1); matches the path stored on the bundle for the
    same agent.  agent_index selects the bundle's filter path for this
    belief.
    """
    d = belief.decomp
    x = bundle.x
    xh = bundle.xhat[agent_index]
    dt = float(bundle.times[1] - bundle.times[0])
    g = d.b11 * x[:-1] + _cols_dot(d.C, xh[:-1])
    dx = np.diff(x)
    dll = -g * dx - (0.5 * dt) * (g * g)
    out = np.empty(len(x))
    out[0] = 0.0
    np.cumsum(dll, out=out[1:])
    if not np.all(np.isfinite(out)):
        raise ValidationError("log projected-density path is not finite")
    return out

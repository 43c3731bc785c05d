"""Conditional-covariance ODE, its stationary solution, and the
steady-state conditional-mean filter.

The covariance of the state given the dividend history evolves
deterministically:

    dV/dt = -[(BV)' + BV - I + g g'],   g_i = (BV)_{1i} - delta_{i1},

with the first row and column identically zero because component 1 is
observed exactly.  The economy runs with the filter in covariance steady
state, where the hidden block Vtilde solves the algebraic equation

    Btilde V + V Btilde' + V C C' V = I.

``stationary_covariance`` solves it by pseudo-time marching of the ODE
from V = 0 (which converges to the stabilizing solution) followed by a
Newton polish; ``filter_step`` advances the conditional mean with the
resulting constant gain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ValidationError
from .model import AgentBelief, BlockDecomposition, validate_stability

log = logging.getLogger(__name__)


@dataclass
class CovarianceState:
    """Conditional covariance at one time point.

    Invariants: symmetric, positive semidefinite, first row and column
    zero (the observed component carries no uncertainty).
    """

    V: np.ndarray
    t: float

    def validate(self):
        V = self.V
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {V.shape}")
        if np.max(np.abs(V - V.T)) > 1e-12:
            raise ValidationError("covariance must be symmetric")
        if np.max(np.abs(V[0, :])) > 1e-12 or np.max(np.abs(V[:, 0])) > 1e-12:
            raise ValidationError("covariance must have zero first row and column")
        smallest = float(np.linalg.eigvalsh(V).min())
        if smallest < -1e-8:
            raise ValidationError(f"covariance not positive semidefinite (min eig {smallest:.3e})")


@dataclass
class FilterState:
    """One agent's conditional mean of the hidden components."""

    xhat: np.ndarray
    agent: int
    t: float


def cov_rhs(V: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Time derivative of the conditional covariance.

    Symmetric output for symmetric input, exactly in floating point: the
    formula is a sum of (BV)' + BV, the identity, and a rank-one outer
    product, all entrywise symmetric.
    """
    V = np.asarray(V, dtype=float)
    B = np.asarray(B, dtype=float)
    BV = B @ V
    g = BV[0, :].copy()
    g[0] -= 1.0
    return -(BV.T + BV - np.eye(V.shape[0]) + np.outer(g, g))


def _rk4_cov_step(V: np.ndarray, B: np.ndarray, dt: float) -> np.ndarray:
    k1 = cov_rhs(V, B)
    k2 = cov_rhs(V + 0.5 * dt * k1, B)
    k3 = cov_rhs(V + 0.5 * dt * k2, B)
    k4 = cov_rhs(V + dt * k3, B)
    Vn = V + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0.5 * (Vn + Vn.T)


def integrate_covariance(V0: CovarianceState, B: np.ndarray, t_end: float,
                         dt: float = 1e-3) -> list[CovarianceState]:
    """Classical 4th-order integration of cov_rhs on a fixed grid.

    Emits every step, symmetrizing after each one.  Positive
    semidefiniteness is checked, not enforced: a smallest eigenvalue
    below -1e-8 aborts with diagnostics.
    """
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    if t_end < 0:
        raise ValidationError(f"t_end must be >= 0, got {t_end}")
    V0.validate()
    B = np.asarray(B, dtype=float)
    out = [CovarianceState(V=V0.V.copy(), t=V0.t)]
    if t_end == 0:
        return out
    n_full = int(np.floor(t_end / dt + 1e-12))
    remainder = t_end - n_full * dt
    V = V0.V.copy()
    t = V0.t
    steps = [dt] * n_full + ([remainder] if remainder > 1e-12 else [])
    for h in steps:
        V = _rk4_cov_step(V, B, h)
        t += h
        smallest = float(np.linalg.eigvalsh(V).min())
        if smallest < -1e-8:
            raise NumericalError(
                f"covariance lost positive semidefiniteness at t = {t:.6g} "
                f"(min eigenvalue {smallest:.3e})"
            )
        out.append(CovarianceState(V=V.copy(), t=t))
    return out


def stationary_residual(Vtilde: np.ndarray, decomp: BlockDecomposition) -> np.ndarray:
    """Residual of the algebraic steady-state equation for the hidden block."""
    Bt = decomp.Btilde
    CC = np.outer(decomp.C, decomp.C)
    m = Bt.shape[0]
    return Bt @ Vtilde + Vtilde @ Bt.T + Vtilde @ CC @ Vtilde - np.eye(m)


def stationary_covariance(decomp: BlockDecomposition, *, rhs_tol: float = 1e-12,
                          residual_tol: float = 1e-10, max_time: float | None = None,
                          use_newton: bool = True) -> np.ndarray:
    """Stationary hidden-block covariance Vtilde.

    Pseudo-time marching of the covariance ODE from V = 0 until the ODE
    right-hand side falls below rhs_tol, then a Newton polish on the
    algebraic equation (each Newton step is a Lyapunov solve).  Newton is
    skipped when its coefficient matrix has condition number above 1e12;
    the marched value then stands on its own.  The returned matrix always
    satisfies the residual check to residual_tol, else NumericalError.
    """
    hidden = validate_stability(decomp.Btilde)
    if not hidden.passed:
        raise ValidationError(
            "stationary covariance needs a stable hidden block "
            f"(min Re eigenvalue = {min(ev.real for ev in hidden.eigenvalues):.3g})"
        )
    lam_min = min(ev.real for ev in hidden.eigenvalues)
    if max_time is None:
        max_time = 200.0 / lam_min

    B = decomp.reassemble()
    n = decomp.n
    V = np.zeros((n, n))
    scale = max(1.0, float(np.abs(hidden.eigenvalues).max()), float(decomp.C @ decomp.C))
    dt = 0.1 / scale
    dt_max = 1.0 / scale
    r = float(np.max(np.abs(cov_rhs(V, B))))
    t = 0.0
    stalled = False
    while r > rhs_tol:
        if t >= max_time:
            stalled = True
            break
        Vn = _rk4_cov_step(V, B, dt)
        rn = float(np.max(np.abs(cov_rhs(Vn, B))))
        if not np.isfinite(rn) or rn > 1.25 * r + 1e-15:
            dt *= 0.5
            if dt < 1e-9:
                stalled = True
                break
            continue
        V, r, t = Vn, rn, t + dt
        dt = min(dt * 1.3, dt_max)

    Vt = 0.5 * (V[1:, 1:] + V[1:, 1:].T)

    if use_newton:
        CC = np.outer(decomp.C, decomp.C)
        for _ in range(8):
            R = stationary_residual(Vt, decomp)
            if np.max(np.abs(R)) < 1e-14:
                break
            M = decomp.Btilde + Vt @ CC
            if np.linalg.cond(M) > 1e12:
                log.warning("stationary covariance: Newton polish skipped "
                            "(ill-conditioned Jacobian); keeping marched value")
                break
            Vt = Vt + sla.solve_continuous_lyapunov(M, -R)
            Vt = 0.5 * (Vt + Vt.T)

    final = float(np.max(np.abs(stationary_residual(Vt, decomp))))
    if not np.isfinite(final) or final > residual_tol:
        hint = " (marching stalled before reaching tolerance)" if stalled else ""
        raise NumericalError(
            f"stationary covariance did not converge: final residual {final:.3e}"
            f" after pseudo-time {t:.1f}{hint}"
        )
    smallest = float(np.linalg.eigvalsh(Vt).min())
    if smallest < -1e-10:
        raise NumericalError(
            f"stationary covariance not positive semidefinite (min eig {smallest:.3e})"
        )
    return Vt


def filter_coefficients(decomp: BlockDecomposition,
                        Vtilde: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constant coefficients of the steady-state conditional-mean update.

    Returns (K1, K2, K3) so that dxhat = (K1 x + K2 xhat) dt + K3 dx:
    K1 = -(A + Vtilde C b11), K2 = -(Btilde + Vtilde C C'), K3 = -Vtilde C.
    """
    VC = Vtilde @ decomp.C
    K1 = -(decomp.A + VC * decomp.b11)
    K2 = -(decomp.Btilde + np.outer(VC, decomp.C))
    K3 = -VC
    return K1, K2, K3


def filter_step(fs: FilterState, x: float, dx: float, dt: float,
                decomp: BlockDecomposition, Vtilde: np.ndarray) -> FilterState:
    """One Euler update of the steady-state filter given an observed increment."""
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    K1, K2, K3 = filter_coefficients(decomp, Vtilde)
    xhat = fs.xhat + (K1 * x + K2 @ fs.xhat) * dt + K3 * dx
    return FilterState(xhat=xhat, agent=fs.agent, t=fs.t + dt)


def innovation_increment(x: float, dx: float, xhat: np.ndarray, dt: float,
                         decomp: BlockDecomposition) -> float:
    """Observed increment minus the filtered drift: dN = dx + (b11 x + C'xhat) dt."""
    return dx + (decomp.b11 * x + decomp.C @ xhat) * dt


def prepare_beliefs(beliefs: list[AgentBelief], **solver_kwargs) -> list[AgentBelief]:
    """Attach the stationary covariance to every belief (in place).

    An agent with C = 0 and A = 0 never updates from data; allowed, with a
    logged warning.
    """
    for j, belief in enumerate(beliefs):
        d = belief.decomp
        if not np.any(d.C) and not np.any(d.A):
            log.warning("agent %d: C = 0 and A = 0, filter never updates from data", j + 1)
        belief.Vtilde = stationary_covariance(d, **solver_kwargs)
    return beliefs

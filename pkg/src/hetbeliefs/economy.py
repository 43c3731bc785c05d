"""Stacked multi-agent dynamics and the pricing kernel along paths.

With every agent running a steady-state filter, the vector
Zbar = (x, xhat_1, ..., xhat_J) is Markov:

    dZbar = B_bar Zbar dt + Q_bar dx.

The kernel's log increment, the riskless rate, and the market price of
risk are quadratic/affine in Zbar with coefficients (Gamma, alpha_bar,
beta_bar) assembled from the agents' (b11, C, gamma).  The kernel is
normalized so its time-0 constant is zero; only ratios ever enter prices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .filtering import filter_coefficients
from .model import AgentBelief, MarketParams


@dataclass
class EconomyCoefficients:
    """Constant coefficients of the stacked economy.

    Dimension d = 1 + J(n-1).  B_bar's first row is zero and Q_bar's
    first entry is 1, so the first component of Zbar tracks x exactly.
    beta_bar is symmetric PSD (a gamma-weighted sum of rank-one outer
    products).
    """

    Gamma: float
    alpha_bar: np.ndarray
    beta_bar: np.ndarray
    A1: np.ndarray
    B1: np.ndarray
    Q1: np.ndarray
    B_bar: np.ndarray
    Q_bar: np.ndarray
    n: int
    J: int

    @property
    def dim(self) -> int:
        return 1 + self.J * (self.n - 1)


def assemble_economy(params: MarketParams, beliefs: list[AgentBelief]) -> EconomyCoefficients:
    """Build the stacked-system coefficients from prepared beliefs.

    Every belief must have its stationary covariance attached; the
    per-agent blocks reuse filter_coefficients so the stacked dynamics
    reproduce the individual filters exactly.
    """
    if len(beliefs) != params.J:
        raise ValidationError(f"expected {params.J} agents, got {len(beliefs)}")
    for j, belief in enumerate(beliefs):
        if belief.Vtilde is None:
            raise ValidationError(
                f"agent {j + 1}: stationary covariance not attached (run prepare_beliefs)"
            )
        if belief.B.shape[0] != params.n:
            raise ValidationError(f"agent {j + 1}: B is {belief.B.shape[0]}x"
                                  f"{belief.B.shape[1]}, economy has n = {params.n}")

    m = params.n - 1
    J = params.J
    d = 1 + J * m

    Gamma = 1.0 / sum(1.0 / b.gamma for b in beliefs)

    alpha_bar = np.zeros(d)
    alpha_bar[0] = -sum(b.decomp.b11 / b.gamma for b in beliefs)
    beta_bar = np.zeros((d, d))
    beta_bar[0, 0] = sum(b.decomp.b11 ** 2 / b.gamma for b in beliefs)
    A1 = np.zeros(J * m)
    Q1 = np.zeros(J * m)
    B1 = np.zeros((J * m, J * m))
    for j, b in enumerate(beliefs):
        sl = slice(j * m, (j + 1) * m)
        dcp = b.decomp
        alpha_bar[1 + j * m:1 + (j + 1) * m] = -dcp.C / b.gamma
        beta_bar[0, 1 + j * m:1 + (j + 1) * m] = dcp.b11 * dcp.C / b.gamma
        beta_bar[1 + j * m:1 + (j + 1) * m, 0] = dcp.b11 * dcp.C / b.gamma
        beta_bar[1 + j * m:1 + (j + 1) * m, 1 + j * m:1 + (j + 1) * m] = \
            np.outer(dcp.C, dcp.C) / b.gamma
        K1, K2, K3 = filter_coefficients(dcp, b.Vtilde)
        A1[sl] = K1
        B1[sl, sl] = K2
        Q1[sl] = K3

    B_bar = np.zeros((d, d))
    B_bar[1:, 0] = A1
    B_bar[1:, 1:] = B1
    Q_bar = np.concatenate(([1.0], Q1))

    smallest = float(np.linalg.eigvalsh(beta_bar).min())
    if smallest < -1e-10:
        raise ValidationError(f"beta_bar lost positive semidefiniteness (min eig {smallest:.3e})")

    return EconomyCoefficients(Gamma=Gamma, alpha_bar=alpha_bar, beta_bar=beta_bar,
                               A1=A1, B1=B1, Q1=Q1, B_bar=B_bar, Q_bar=Q_bar,
                               n=params.n, J=J)


def stacked_step(Zbar: np.ndarray, dx: float, dt: float,
                 coeffs: EconomyCoefficients) -> np.ndarray:
    """Euler update of the stacked state; the first component advances by exactly dx."""
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    return Zbar + dt * (coeffs.B_bar @ Zbar) + dx * coeffs.Q_bar


def log_spd_increment(Zbar: np.ndarray, dx: float, dt: float,
                      coeffs: EconomyCoefficients, params: MarketParams) -> float:
    """One Euler increment of the log pricing kernel.

    d log zeta = -rho dt - Gamma sigma dx
                 + (Gamma/J) (alpha_bar'Zbar dx - 1/2 Zbar'beta_bar Zbar dt).
    """
    G = coeffs.Gamma
    quad = float(Zbar @ coeffs.beta_bar @ Zbar)
    lin = float(coeffs.alpha_bar @ Zbar)
    return (-params.rho * dt - G * params.sigma * dx
            + (G / coeffs.J) * (lin * dx - 0.5 * quad * dt))


def riskless_rate(Zbar: np.ndarray, coeffs: EconomyCoefficients,
                  params: MarketParams) -> float:
    """Short rate read off the pricing kernel.

    r = rho + (Gamma/2J) Zbar'beta_bar Zbar
            - (Gamma/2) (alpha_bar'Zbar / J - sigma)^2.
    At Zbar = 0 this is rho - (Gamma/2) sigma^2.
    """
    G = coeffs.Gamma
    quad = float(Zbar @ coeffs.beta_bar @ Zbar)
    lin = float(coeffs.alpha_bar @ Zbar) / coeffs.J - params.sigma
    return params.rho + 0.5 * G / coeffs.J * quad - 0.5 * G * lin * lin


def market_price_of_risk(Zbar: np.ndarray, coeffs: EconomyCoefficients,
                         params: MarketParams) -> float:
    """Negative diffusion loading of the kernel: kappa = Gamma sigma - (Gamma/J) alpha_bar'Zbar."""
    return coeffs.Gamma * params.sigma - (coeffs.Gamma / coeffs.J) * float(
        coeffs.alpha_bar @ Zbar)


def path_rates(times: np.ndarray, x: np.ndarray, xhats: list[np.ndarray],
               coeffs: EconomyCoefficients, params: MarketParams) -> dict:
    """Riskless rate, risk price, and cumulative log kernel along one path.

    xhats holds one (T+1, n-1) array per agent; the stacked state at each
    grid point is their concatenation behind x.
    """
    T = len(times) - 1
    Z = np.concatenate([x[:, None]] + [xh for xh in xhats], axis=1)
    r = np.empty(T + 1)
    kappa = np.empty(T + 1)
    logzeta = np.zeros(T + 1)
    for k in range(T + 1):
        r[k] = riskless_rate(Z[k], coeffs, params)
        kappa[k] = market_price_of_risk(Z[k], coeffs, params)
        if k < T:
            dt = times[k + 1] - times[k]
            dxk = x[k + 1] - x[k]
            logzeta[k + 1] = logzeta[k] + log_spd_increment(Z[k], dxk, dt, coeffs, params)
    return {"t": times, "r": r, "kappa": kappa, "logzeta": logzeta}

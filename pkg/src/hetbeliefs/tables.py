"""Column/row tables for every tabular artifact.

Each builder returns (columns, rows) with plain Python values so the
service can ship them as JSON and the CLI can write them as CSV without
further interpretation.
"""

from __future__ import annotations

import numpy as np

from .economy import EconomyCoefficients, path_rates
from .errors import ValidationError
from .filtering import CovarianceState, integrate_covariance
from .model import AgentBelief, MarketParams
from .pricing import RiccatiSolution
from .simulate import SimConfig, simulate_truth


def stationary_cov_table(beliefs: list[AgentBelief]):
    """Per-agent stationary covariance entries, one row per (agent, i, j)."""
    columns = ["agent", "i", "j", "value"]
    rows = []
    for j, belief in enumerate(beliefs):
        V = belief.Vtilde
        if V is None:
            raise ValidationError(f"agent {j + 1}: stationary covariance not attached")
        for r in range(V.shape[0]):
            for c in range(V.shape[1]):
                rows.append([j + 1, r + 1, c + 1, float(V[r, c])])
    return columns, rows


def cov_path_table(belief: AgentBelief, t_end: float, dt: float):
    """Transient covariance path from V = 0 for one agent: t, vec(V_t)."""
    n = belief.B.shape[0]
    V0 = CovarianceState(V=np.zeros((n, n)), t=0.0)
    traj = integrate_covariance(V0, belief.B, t_end, dt)
    columns = ["t"] + [f"v_{i + 1}_{j + 1}" for i in range(n) for j in range(n)]
    rows = [[float(st.t)] + [float(v) for v in st.V.ravel()] for st in traj]
    return columns, rows


def simulate_table(cfg: SimConfig, params: MarketParams, beliefs: list[AgentBelief]):
    """Long-format paths: path_id, t, x, delta, then per-agent columns."""
    m = params.n - 1
    columns = ["path_id", "t", "x", "delta"]
    for j in range(params.J):
        columns += [f"xhat_{j + 1}_{k + 1}" for k in range(m)]
        columns += [f"N_{j + 1}", f"loglamhat_{j + 1}"]
    rows = []
    for bundle in simulate_truth(cfg, params, beliefs):
        for s in range(len(bundle.times)):
            row = [bundle.path_index, float(bundle.times[s]), float(bundle.x[s]),
                   float(bundle.dividends[s])]
            for j in range(params.J):
                row += [float(v) for v in bundle.xhat[j][s]]
                row += [float(bundle.N[j][s]), float(bundle.loglambdahat[j][s])]
            rows.append(row)
    return columns, rows


def simulate_summary_table(cfg: SimConfig, params: MarketParams,
                           beliefs: list[AgentBelief]):
    """Cross-path mean and sample variance per time point."""
    if cfg.n_paths < 2:
        raise ValidationError("summary needs n_paths >= 2")
    m = params.n - 1
    names = ["x", "delta"]
    for j in range(params.J):
        names += [f"xhat_{j + 1}_{k + 1}" for k in range(m)]
        names += [f"N_{j + 1}", f"loglamhat_{j + 1}"]

    acc_sum = acc_sq = times = None
    count = 0
    for bundle in simulate_truth(cfg, params, beliefs):
        cols = [bundle.x, bundle.dividends]
        for j in range(params.J):
            cols += [bundle.xhat[j][:, k] for k in range(m)]
            cols += [bundle.N[j], bundle.loglambdahat[j]]
        block = np.stack(cols, axis=1)
        if acc_sum is None:
            times = bundle.times
            acc_sum = np.zeros_like(block)
            acc_sq = np.zeros_like(block)
        acc_sum += block
        acc_sq += block * block
        count += 1

    mean = acc_sum / count
    var = (acc_sq - count * mean * mean) / (count - 1)
    columns = ["t"]
    for name in names:
        columns += [f"mean_{name}", f"var_{name}"]
    rows = []
    for s in range(len(times)):
        row = [float(times[s])]
        for c in range(len(names)):
            row += [float(mean[s, c]), float(var[s, c])]
        rows.append(row)
    return columns, rows


def rate_path_table(cfg: SimConfig, params: MarketParams, beliefs: list[AgentBelief],
                    coeffs: EconomyCoefficients):
    """Riskless rate, risk price, and log kernel along simulated paths."""
    columns = ["path_id", "t", "r", "kappa", "logzeta"]
    rows = []
    for bundle in simulate_truth(cfg, params, beliefs):
        out = path_rates(bundle.times, bundle.x, bundle.xhat, coeffs, params)
        for s in range(len(bundle.times)):
            rows.append([bundle.path_index, float(out["t"][s]), float(out["r"][s]),
                         float(out["kappa"][s]), float(out["logzeta"][s])])
    return columns, rows


def riccati_table(sol: RiccatiSolution):
    """Solution grids: tau, vec(a), b, c and the theta sensitivities."""
    d = sol.b.shape[1]
    columns = ["tau"]
    columns += [f"a_{i + 1}_{j + 1}" for i in range(d) for j in range(d)]
    columns += [f"b_{i + 1}" for i in range(d)]
    columns += ["c"]
    columns += [f"db_dtheta_{i + 1}" for i in range(d)]
    columns += ["dc_dtheta", "d2c_dtheta2"]
    rows = []
    for t in range(len(sol.taus)):
        row = [float(sol.taus[t])]
        row += [float(v) for v in sol.a[t].ravel()]
        row += [float(v) for v in sol.b[t]]
        row += [float(sol.c[t])]
        row += [float(v) for v in sol.db_dtheta[t]]
        row += [float(sol.dc_dtheta[t]), float(sol.d2c_dtheta2[t])]
        rows.append(row)
    return columns, rows

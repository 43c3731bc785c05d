"""Oracle-based verification: every check pits an implementation against
an independent computation (closed form, brute-force integration, or
Monte Carlo) and reports a pass/fail with the measured numbers.

The standard desk-scale economies used throughout live here too, so the
CLI, the service, and the test suite all verify the same objects.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .economy import assemble_economy, riskless_rate, stacked_step
from .errors import ValidationError
from .filtering import (FilterState, filter_coefficients, filter_step,
                        prepare_beliefs, stationary_covariance, stationary_residual)
from .model import AgentBelief, MarketParams, decompose_belief, parse_config
from .pricing import (eval_dVT_dtheta, eval_VT, mc_price_oracle, solve_riccati,
                      stock_price, _mc_Vt_engine)
from .rng import chunk_size, map_chunks, path_generator
from .simulate import SimConfig, simulate_truth, stationary_conditional, \
    _cols_dot, _cols_matvec


# ---------------------------------------------------------------------------
# standard desk-scale economies

def config_standard_j1() -> dict:
    """Single-agent, one hidden component; hidden-block covariance sqrt(2)-1."""
    return {
        "n": 2, "rho": 0.2, "a0": 1.0, "sigma": 0.1,
        "agents": [{"gamma": 1.0, "B": [[1.0, 1.0], [0.2, 1.0]]}],
        "simulation": {"truth": "p0", "t_end": 1.0, "dt": 1e-3, "n_paths": 100, "seed": 7},
        "pricing": {"dtau": 1e-2, "t_max": 50.0},
    }


def config_standard_j2() -> dict:
    """Two agents with equal risk aversion 2 (aggregate 1) and different drifts."""
    return {
        "n": 2, "rho": 0.2, "a0": 1.0, "sigma": 0.1,
        "agents": [
            {"gamma": 2.0, "B": [[1.0, 1.0], [0.2, 1.0]]},
            {"gamma": 2.0, "B": [[0.5, 0.8], [0.1, 1.5]]},
        ],
        "simulation": {"truth": "p0", "t_end": 1.0, "dt": 1e-3, "n_paths": 100, "seed": 7},
        "pricing": {"dtau": 1e-2, "t_max": 50.0},
    }


def config_decoupled(rho: float = 0.02) -> dict:
    """Driftless-dividend belief: closed-form prices, no filtering feedback."""
    return {
        "n": 2, "rho": rho, "a0": 1.0, "sigma": 0.1,
        "agents": [{"gamma": 1.0, "B": [[0.0, 0.0], [0.0, 1.0]]}],
        "simulation": {"truth": "p0", "t_end": 1.0, "dt": 1e-3, "n_paths": 100, "seed": 7},
        "pricing": {"dtau": 5e-2, "t_max": None},
    }


def build_economy(doc: dict):
    """(params, beliefs, coeffs) with stationary covariances attached."""
    params, beliefs = parse_config(doc)
    prepare_beliefs(beliefs)
    return params, beliefs, assemble_economy(params, beliefs)


# ---------------------------------------------------------------------------
# reporting containers

@dataclass
class CheckResult:
    cid: str
    name: str
    passed: bool
    detail: str
    measured: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.measured = {k: float(v) for k, v in self.measured.items()}


@dataclass
class VerifyReport:
    seed: int
    quick: bool
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "quick": self.quick, "passed": self.passed,
                "checks": [asdict(c) for c in self.checks]}

    def table(self) -> str:
        lines = [f"{'criterion':<34} {'status':<6} detail"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{c.cid + ' ' + c.name:<34} {status:<6} {c.detail}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Monte Carlo engines shared by checks and tests

def mc_filter_calibration(params: MarketParams, belief: AgentBelief, t_end: float,
                          dt: float, n_paths: int, seed: int):
    """Simulate truth under the agent's own measure with the steady-state
    filter and return the cross-path error sample (hidden - xhat) at t_end.

    The initial hidden truth is drawn from the belief's stationary law
    conditioned on x0 = 0, matching the filter start xhat0 = 0.
    """
    K1, K2, K3 = filter_coefficients(belief.decomp, belief.Vtilde)
    B = belief.B
    n = params.n
    m = n - 1
    S = int(round(t_end / dt))
    sdt = np.sqrt(dt)
    slope, L0 = stationary_conditional(B)
    del slope  # x0 = 0, so the conditional mean is zero

    def run_chunk(lo, hi):
        P = hi - lo
        xi = np.empty((P, S, n))
        h0 = np.empty((P, m))
        for p in range(P):
            gen = path_generator(seed, lo + p)
            h0[p] = L0 @ gen.standard_normal(m)
            xi[p] = gen.standard_normal((S, n))
        X = np.empty((P, n))
        X[:, 0] = 0.0
        X[:, 1:] = h0
        xh = np.zeros((P, m))
        for s in range(S):
            Xn = X - dt * _cols_matvec(B, X) + sdt * xi[:, s, :]
            dx = Xn[:, 0] - X[:, 0]
            xh = xh + dt * (X[:, 0][:, None] * K1 + _cols_matvec(K2, xh)) + dx[:, None] * K3
            X = Xn
        return X[:, 1:] - xh

    return np.vstack(map_chunks(run_chunk, n_paths, chunk_size(S, n)))


def mc_lambda_martingale(params: MarketParams, belief: AgentBelief, t_end: float,
                         dt: float, n_paths: int, seed: int):
    """Joint simulation of the full and projected densities under the
    Brownian reference measure.

    Returns per-path terminal arrays (lamhat, lamhat * x - lam * x); the
    first should average 1, the second 0.
    """
    K1, K2, K3 = filter_coefficients(belief.decomp, belief.Vtilde)
    B = belief.B
    b11, C = belief.decomp.b11, belief.decomp.C
    n = params.n
    m = n - 1
    S = int(round(t_end / dt))
    sdt = np.sqrt(dt)

    def run_chunk(lo, hi):
        P = hi - lo
        xi = np.empty((P, S, n))
        for p in range(P):
            xi[p] = path_generator(seed, lo + p).standard_normal((S, n))
        X = np.zeros((P, n))
        xh = np.zeros((P, m))
        loglam = np.zeros(P)
        loglamhat = np.zeros(P)
        for s in range(S):
            dW = sdt * xi[:, s, :]
            Xn = X + dW
            dx = Xn[:, 0] - X[:, 0]
            BX = _cols_matvec(B, X)
            loglam += -np.einsum("pi,pi->p", BX, dW) \
                - 0.5 * dt * np.einsum("pi,pi->p", BX, BX)
            g = b11 * X[:, 0] + _cols_dot(C, xh)
            loglamhat += -g * dx - (0.5 * dt) * (g * g)
            xh = xh + dt * (X[:, 0][:, None] * K1 + _cols_matvec(K2, xh)) + dx[:, None] * K3
            X = Xn
        return np.exp(loglamhat), np.exp(loglamhat) * X[:, 0] - np.exp(loglam) * X[:, 0]

    pieces = map_chunks(run_chunk, n_paths, chunk_size(S, n))
    lamhat = np.concatenate([p[0] for p in pieces])
    diff = np.concatenate([p[1] for p in pieces])
    return lamhat, diff


def gaussian_third_moment(mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Exact tensor E[X_i X_j X_k] for X ~ N(mean, cov)."""
    m = np.asarray(mean, float)
    S = np.asarray(cov, float)
    d = len(m)
    T = np.empty((d, d, d))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                T[i, j, k] = m[i] * S[j, k] + m[j] * S[i, k] + m[k] * S[i, j] \
                    + m[i] * m[j] * m[k]
    return T


def _random_stable_economy(rng: np.random.Generator, n: int, J: int) -> dict:
    agents = []
    for _ in range(J):
        m = n - 1
        M = rng.normal(size=(m, m))
        shift = max(0.0, -np.linalg.eigvals(M).real.min()) + rng.uniform(0.3, 1.0)
        Bt = M + shift * np.eye(m)
        B = np.zeros((n, n))
        B[0, 0] = rng.uniform(0.3, 1.5)
        B[0, 1:] = rng.normal(scale=0.7, size=m)
        B[1:, 0] = rng.normal(scale=0.7, size=m)
        B[1:, 1:] = Bt
        # keep the full matrix stable too so the config validates
        full_shift = -min(0.0, np.linalg.eigvals(B).real.min()) + 0.1
        B[0, 0] += full_shift
        B[1:, 1:] += full_shift * np.eye(m)
        agents.append({"gamma": float(rng.uniform(0.5, 3.0)),
                       "B": [[float(v) for v in row] for row in B]})
    return {"n": n, "rho": 0.1, "a0": 1.0, "sigma": 0.1, "agents": agents}


# ---------------------------------------------------------------------------
# the checks

def check_riskless_rate_limit() -> CheckResult:
    worst = 0.0
    for doc in (config_standard_j1(), config_standard_j2()):
        for gamma_scale in (1.0, 0.5, 2.5):
            d = {**doc, "agents": [{**a, "gamma": a["gamma"] * gamma_scale}
                                   for a in doc["agents"]]}
            params, beliefs, coeffs = build_economy(d)
            r0 = riskless_rate(np.zeros(coeffs.dim), coeffs, params)
            expected = params.rho - 0.5 * coeffs.Gamma * params.sigma ** 2
            worst = max(worst, abs(r0 - expected))
    return CheckResult("1", "riskless-rate-limit", worst <= 1e-15,
                       f"max |r(0) - (rho - Gamma sigma^2/2)| = {worst:.2e} (tol 1e-15)",
                       {"max_abs_diff": worst})


def check_stationary_scalar_grid() -> CheckResult:
    worst = 0.0
    for beta in (0.5, 1.0, 2.0):
        for c in (0.5, 1.0, 2.0):
            d = decompose_belief(np.array([[1.0, c], [0.0, beta]]))
            V = stationary_covariance(d)[0, 0]
            exact = (-beta + np.sqrt(beta * beta + c * c)) / (c * c)
            worst = max(worst, abs(V - exact))
    return CheckResult("2", "stationary-scalar-grid", worst <= 1e-10,
                       f"max |V - closed form| = {worst:.2e} (tol 1e-10)",
                       {"max_abs_diff": worst})


def check_lyapunov_limit() -> CheckResult:
    worst = 0.0
    lams = [0.5, 1.0, 2.0, 3.0]
    for m in range(1, 5):
        n = m + 1
        B = np.zeros((n, n))
        B[0, 0] = 1.0
        B[1:, 1:] = np.diag(lams[:m])
        d = decompose_belief(B)
        V = stationary_covariance(d)
        exact = np.diag([1.0 / (2.0 * lam) for lam in lams[:m]])
        worst = max(worst, float(np.max(np.abs(V - exact))))
    return CheckResult("3", "lyapunov-limit", worst <= 1e-10,
                       f"max |V - diag(1/2lambda)| = {worst:.2e} (tol 1e-10)",
                       {"max_abs_diff": worst})


def check_stationary_residual_random(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 6))
        doc = _random_stable_economy(rng, n, 1)
        d = decompose_belief(np.array(doc["agents"][0]["B"]))
        V = stationary_covariance(d)
        worst = max(worst, float(np.max(np.abs(stationary_residual(V, d)))))
    return CheckResult("4", "stationary-residual-random", worst <= 1e-10,
                       f"max residual over 20 economies (n <= 5) = {worst:.2e} (tol 1e-10)",
                       {"max_residual": worst})


def check_filter_calibration(seed: int, n_paths: int = 10000, dt: float = 1e-3,
                             t_end: float = 2.0) -> CheckResult:
    params, beliefs, _ = build_economy(config_standard_j1())
    belief = beliefs[0]
    errors = mc_filter_calibration(params, belief, t_end, dt, n_paths, seed)
    emp_cov = np.atleast_2d(np.cov(errors.T, ddof=1))
    rel = float(np.max(np.abs(emp_cov - belief.Vtilde) / np.abs(belief.Vtilde)))
    mean = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / np.sqrt(n_paths)
    mean_z = float(np.max(np.abs(mean) / se))
    passed = rel < 0.05 and mean_z < 3.0
    return CheckResult("5", "filter-calibration-mc", passed,
                       f"cov rel err = {rel:.3%} (tol 5%), mean |z| = {mean_z:.2f} (tol 3), "
                       f"{n_paths} paths",
                       {"cov_rel_err": rel, "mean_abs_z": mean_z})


def check_lambda_martingale(seed: int, n_paths: int = 100000, dt: float = 1e-3) -> CheckResult:
    params, beliefs, _ = build_economy(config_standard_j1())
    lamhat, diff = mc_lambda_martingale(params, beliefs[0], 1.0, dt, n_paths, seed)
    z_mart = float((lamhat.mean() - 1.0) / (lamhat.std(ddof=1) / np.sqrt(n_paths)))
    z_proj = float(diff.mean() / (diff.std(ddof=1) / np.sqrt(n_paths)))
    passed = abs(z_mart) < 3.0 and abs(z_proj) < 3.0
    return CheckResult("6", "lamhat-martingale-mc", passed,
                       f"E[lamhat]-1: z = {z_mart:+.2f}; E[lamhat x - lam x]: z = {z_proj:+.2f} "
                       f"(tol 3), {n_paths} paths",
                       {"z_martingale": z_mart, "z_projection": z_proj})


def check_stacked_equivalence(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n, J in [(2, 1), (3, 2), (4, 4), (2, 3)]:
        doc = _random_stable_economy(rng, n, J)
        params, beliefs, coeffs = build_economy(doc)
        m = n - 1
        Z = np.zeros(coeffs.dim)
        states = [FilterState(xhat=np.zeros(m), agent=j, t=0.0) for j in range(J)]
        x, dt = 0.0, 1e-3
        for _ in range(250):
            dx = float(rng.normal(scale=np.sqrt(dt)))
            Zn = stacked_step(Z, dx, dt, coeffs)
            new_states = [filter_step(fs, x, dx, dt, beliefs[j].decomp, beliefs[j].Vtilde)
                          for j, fs in enumerate(states)]
            concat = np.concatenate([[x + dx]] + [fs.xhat for fs in new_states])
            worst = max(worst, float(np.max(np.abs(Zn - concat))))
            Z, states, x = Zn, new_states, x + dx
    return CheckResult("7", "stacked-equivalence", worst <= 1e-12,
                       f"max per-step |stacked - per-agent| = {worst:.2e} (tol 1e-12)",
                       {"max_abs_diff": worst})


def check_vt_oracle(seed: int, n_paths: int = 100000, dt: float = 1e-3) -> CheckResult:
    taus = [0.25, 0.5, 1.0]
    thetas = [0.0, 0.3]
    zmax = 0.0
    details = []
    for label, doc, Z in [("J1", config_standard_j1(), np.array([0.3, -0.2])),
                          ("J2", config_standard_j2(), np.array([0.3, -0.2, 0.1]))]:
        params, beliefs, coeffs = build_economy(doc)
        sol = solve_riccati(coeffs, params, tau_max=max(taus), dtau=1e-3)
        means, errs = _mc_Vt_engine(coeffs, params, taus, Z, thetas, n_paths, seed, dt)
        for i, tau in enumerate(taus):
            for k, th in enumerate(thetas):
                ode = eval_VT(sol, tau, Z, th)
                z = (means[i, k] - ode) / errs[i, k]
                zmax = max(zmax, abs(float(z)))
        details.append(label)
    return CheckResult("8", "riccati-vs-mc-oracle", zmax < 3.0,
                       f"max |z| over {len(details)} economies x 3 taus x 2 thetas = "
                       f"{zmax:.2f} (tol 3), {n_paths} paths",
                       {"max_abs_z": zmax})


def check_decoupled_price() -> CheckResult:
    doc = config_decoupled(rho=0.02)
    params, beliefs, coeffs = build_economy(doc)
    T_max = 10.0 / params.rho
    sol = solve_riccati(coeffs, params, tau_max=T_max, dtau=5e-2)
    quote = stock_price(sol, np.zeros(coeffs.dim), params, T_max=T_max)
    G = coeffs.Gamma
    rho_eff = params.rho - 0.5 * G * G * params.sigma ** 2
    exact = params.a0 / rho_eff - G * params.sigma ** 2 / rho_eff ** 2
    rel = abs(quote.S - exact) / exact
    return CheckResult("9", "decoupled-closed-form-price", rel < 1e-3,
                       f"S = {quote.S:.6f} vs closed form {exact:.6f}, "
                       f"rel err = {rel:.3%} (tol 0.1%)",
                       {"S": quote.S, "exact": exact, "rel_err": rel})


def check_coupled_price_oracle(seed: int, n_paths: int = 6000, dt: float = 2.5e-3) -> CheckResult:
    doc = config_standard_j1()
    params, beliefs, coeffs = build_economy(doc)
    T_max = 50.0
    sol = solve_riccati(coeffs, params, tau_max=T_max, dtau=1e-2)
    Z = np.zeros(coeffs.dim)
    quote = stock_price(sol, Z, params, T_max=T_max)
    mc_mean, mc_err = mc_price_oracle(coeffs, params, Z, T_max, n_paths, seed, dt=dt)
    z = (mc_mean - quote.S_truncated) / mc_err
    return CheckResult("10", "coupled-price-oracle", abs(z) < 3.0,
                       f"quad = {quote.S_truncated:.4f}, mc = {mc_mean:.4f} +- {mc_err:.4f}, "
                       f"z = {z:+.2f} (tol 3), {n_paths} paths",
                       {"quad": quote.S_truncated, "mc": mc_mean, "stderr": mc_err,
                        "z": float(z)})


def check_theta_sensitivity() -> CheckResult:
    h = 1e-5
    worst = 0.0
    for doc, Z in [(config_decoupled(), np.array([0.4, 0.0])),
                   (config_standard_j1(), np.array([0.3, -0.2])),
                   (config_standard_j2(), np.array([0.3, -0.2, 0.1]))]:
        params, beliefs, coeffs = build_economy(doc)
        sol = solve_riccati(coeffs, params, tau_max=1.0, dtau=1e-3)
        for tau in (0.25, 1.0):
            fd = (eval_VT(sol, tau, Z, h) - eval_VT(sol, tau, Z, -h)) / (2.0 * h)
            ode = eval_dVT_dtheta(sol, tau, Z)
            worst = max(worst, abs(fd - ode) / abs(ode))
    return CheckResult("11", "theta-sensitivity-fd", worst < 1e-6,
                       f"max rel err sensitivity vs central FD = {worst:.2e} (tol 1e-6)",
                       {"max_rel_err": worst})


def check_gaussian_third_moment(seed: int, n_draws: int = 1000000) -> CheckResult:
    mean = np.array([0.3, -0.5, 0.2])
    A = np.array([[1.0, 0.0, 0.0], [0.4, 0.8, 0.0], [-0.3, 0.2, 0.6]])
    cov = A @ A.T
    gen = path_generator(seed, 0)
    X = mean + gen.standard_normal((n_draws, 3)) @ A.T
    exact = gaussian_third_moment(mean, cov)
    zmax = 0.0
    for i in range(3):
        for j in range(i, 3):
            for k in range(j, 3):
                prod = X[:, i] * X[:, j] * X[:, k]
                se = prod.std(ddof=1) / np.sqrt(n_draws)
                zmax = max(zmax, abs(float((prod.mean() - exact[i, j, k]) / se)))
    return CheckResult("12", "gaussian-third-moment", zmax < 3.0,
                       f"max |z| over distinct index triples = {zmax:.2f} (tol 3), "
                       f"{n_draws} draws",
                       {"max_abs_z": zmax})


def check_simulation_determinism(seed: int) -> CheckResult:
    doc = config_standard_j1()
    params, beliefs, _ = build_economy(doc)
    cfg = SimConfig(truth=1, t_end=0.5, dt=1e-3, n_paths=32, seed=seed)

    def digest():
        h = hashlib.sha256()
        for bundle in simulate_truth(cfg, params, beliefs):
            h.update(bundle.x.tobytes())
            h.update(bundle.hidden.tobytes())
            for arr in bundle.xhat + bundle.N + bundle.loglambdahat:
                h.update(arr.tobytes())
        return h.hexdigest()

    d1, d2 = digest(), digest()
    passed = d1 == d2
    return CheckResult("13", "determinism-rerun", passed,
                       f"sha256(run1) {'==' if passed else '!='} sha256(run2) "
                       f"({d1[:12]}...)",
                       {"equal": float(passed)})


def run_verify_all(seed: int = 7, quick: bool = False) -> VerifyReport:
    """Run every check; quick mode shrinks the Monte Carlo sizes."""
    if quick:
        sizes = {"calib": (3000, 2e-3), "mart": (20000, 2e-3),
                 "vt": (20000, 1e-3), "price": (2000, 5e-3), "third": 200000}
    else:
        sizes = {"calib": (10000, 1e-3), "mart": (100000, 1e-3),
                 "vt": (100000, 1e-3), "price": (6000, 2.5e-3), "third": 1000000}
    checks = [
        check_riskless_rate_limit(),
        check_stationary_scalar_grid(),
        check_lyapunov_limit(),
        check_stationary_residual_random(seed + 505),
        check_filter_calibration(seed, *sizes["calib"]),
        check_lambda_martingale(seed + 101, *sizes["mart"]),
        check_stacked_equivalence(seed + 606),
        check_vt_oracle(seed + 202, *sizes["vt"]),
        check_decoupled_price(),
        check_coupled_price_oracle(seed + 303, *sizes["price"]),
        check_theta_sensitivity(),
        check_gaussian_third_moment(seed + 404, sizes["third"]),
        check_simulation_determinism(seed + 707),
    ]
    return VerifyReport(seed=seed, quick=quick, checks=checks)


def run_verify_vt(doc: dict, seed: int = 7, n_paths: int = 20000,
                  taus=(0.25, 0.5, 1.0), thetas=(0.0, 0.3), dt: float = 1e-3,
                  Zbar=None):
    """Conditional-expectation oracle table for a user economy.

    Returns (columns, rows); one row per (tau, theta) with the ODE value,
    the Monte Carlo value, its standard error, the z-score, and pass/fail
    at |z| < 3.
    """
    params, beliefs, coeffs = build_economy(doc)
    Z = np.zeros(coeffs.dim) if Zbar is None else np.asarray(Zbar, float)
    if Z.shape != (coeffs.dim,):
        raise ValidationError(f"zbar must have length {coeffs.dim}, got {len(Z)}")
    sol = solve_riccati(coeffs, params, tau_max=max(taus), dtau=1e-3)
    means, errs = _mc_Vt_engine(coeffs, params, list(taus), Z, list(thetas),
                                n_paths, seed, dt)
    columns = ["tau", "theta", "vt_ode", "vt_mc", "stderr", "z", "passed"]
    rows = []
    for i, tau in enumerate(taus):
        for k, th in enumerate(thetas):
            ode = eval_VT(sol, tau, Z, th)
            z = float((means[i, k] - ode) / errs[i, k]) if errs[i, k] > 0 else 0.0
            rows.append([float(tau), float(th), float(ode), float(means[i, k]),
                         float(errs[i, k]), z, "yes" if abs(z) < 3.0 else "no"])
    return columns, rows

"""Economy parameters, belief matrices, and configuration ingestion.

Each agent is described by an n x n drift matrix B and a risk aversion
gamma.  The first state component is pinned to the dividend, so B splits
into the observed entry b11, the row coupling C, the column coupling A,
and the hidden-block matrix Btilde; downstream code works almost entirely
with that split.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError

log = logging.getLogger(__name__)

# Eigenvalues whose real part is below this tolerance count as unstable;
# values within the tolerance of zero fail (conservative).
STABILITY_TOL = 1e-9


@dataclass
class BlockDecomposition:
    """Split of B into [[b11, C'], [A, Btilde]].

    C and A are 1-d arrays of length n - 1: C is the first row of B
    without b11, A is the first column without b11.
    """

    b11: float
    C: np.ndarray
    A: np.ndarray
    Btilde: np.ndarray

    @property
    def n(self) -> int:
        return self.Btilde.shape[0] + 1

    def reassemble(self) -> np.ndarray:
        """Inverse of decompose_belief; exact, entrywise."""
        n = self.n
        B = np.empty((n, n))
        B[0, 0] = self.b11
        B[0, 1:] = self.C
        B[1:, 0] = self.A
        B[1:, 1:] = self.Btilde
        return B


@dataclass
class MarketParams:
    """Economy-wide constants.

    n is the state dimension (>= 2 so there is something to filter), J the
    number of agents, rho the discount rate, and the dividend line is
    a0 + sigma * x.
    """

    n: int
    J: int
    rho: float
    a0: float
    sigma: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(
                "state dimension n must be an integer >= 2 "
                "(with n = 1 there is no hidden component to filter)"
            )
        if int(self.J) != self.J or self.J < 1:
            raise ValidationError("agent count J must be an integer >= 1")
        if not self.rho > 0:
            raise ValidationError(f"discount rate rho must be > 0, got {self.rho}")
        if not self.sigma > 0:
            raise ValidationError(f"dividend loading sigma must be > 0, got {self.sigma}")
        self.n = int(self.n)
        self.J = int(self.J)


@dataclass
class AgentBelief:
    """One agent's drift matrix and risk aversion.

    The block decomposition is derived on construction.  Vtilde, the
    stationary conditional covariance of the hidden block, is attached
    later by the filtering layer (``prepare_beliefs``).
    """

    B: np.ndarray
    gamma: float
    decomp: BlockDecomposition = field(init=False)
    Vtilde: np.ndarray | None = None

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        if not self.gamma > 0:
            raise ValidationError(f"risk aversion gamma must be > 0, got {self.gamma}")
        self.decomp = decompose_belief(self.B)


@dataclass
class StabilityReport:
    """Eigenvalues of a drift matrix with per-eigenvalue pass flags.

    An eigenvalue passes iff its real part exceeds STABILITY_TOL; the
    report passes iff every eigenvalue passes.
    """

    eigenvalues: np.ndarray
    passed_each: list[bool]
    passed: bool


def decompose_belief(B) -> BlockDecomposition:
    """Block-split a square drift matrix; raises on non-square input."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ConfigError(f"belief matrix must be square, got shape {B.shape}")
    if B.shape[0] < 2:
        raise ValidationError("belief matrix must be at least 2x2")
    return BlockDecomposition(
        b11=float(B[0, 0]),
        C=B[0, 1:].copy(),
        A=B[1:, 0].copy(),
        Btilde=B[1:, 1:].copy(),
    )


def validate_stability(B) -> StabilityReport:
    """Eigenvalue diagnostics for a drift matrix.

    The mean of the state reverts under the drift -B, so stationarity
    needs every eigenvalue of B in the open right half plane.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ConfigError(f"stability check needs a square matrix, got shape {B.shape}")
    eig = np.linalg.eigvals(B)
    eig = eig[np.argsort(eig.real)]
    flags = [bool(ev.real > STABILITY_TOL) for ev in eig]
    return StabilityReport(eigenvalues=eig, passed_each=flags, passed=all(flags))


def _as_matrix(raw, n: int, label: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != n or not all(
        isinstance(row, list) and len(row) == n for row in raw
    ):
        rows = len(raw) if isinstance(raw, list) else "?"
        cols = len(raw[0]) if isinstance(raw, list) and raw and isinstance(raw[0], list) else "?"
        raise ConfigError(f"{label}: B must be a {n}x{n} row-major matrix, got {rows}x{cols}")
    try:
        B = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label}: B contains a non-numeric entry ({exc})") from None
    if not np.all(np.isfinite(B)):
        raise ConfigError(f"{label}: B contains non-finite entries")
    return B


def _check_agent_stability(B: np.ndarray, label: str) -> None:
    decomp = decompose_belief(B)
    hidden = validate_stability(decomp.Btilde)
    if not hidden.passed:
        bad = min(ev.real for ev in hidden.eigenvalues)
        raise ValidationError(
            f"{label}: hidden-block eigenvalue with non-positive real part (min Re = {bad:.3g})"
        )
    if decomp.b11 == 0.0 and not np.any(decomp.C):
        # First row of B identically zero: the agent believes the dividend
        # component is driftless.  The full matrix then has a zero
        # eigenvalue by construction, which is fine; only the hidden block
        # needs to be stable.
        log.warning(
            "%s: first row of B is zero (dividend believed driftless); "
            "full-matrix stability check skipped",
            label,
        )
        return
    report = validate_stability(B)
    if not report.passed:
        bad = min(ev.real for ev in report.eigenvalues)
        raise ValidationError(
            f"{label}: eigenvalue with non-positive real part (min Re = {bad:.3g})"
        )


def parse_config(doc) -> tuple[MarketParams, list[AgentBelief]]:
    """Validate a configuration document (already-parsed JSON).

    Returns market parameters and one belief per agent, block
    decompositions populated and Vtilde left unset.  Extra sections
    ("simulation", "pricing") are ignored here; their owners consume them.
    """
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in ("n", "rho", "a0", "sigma", "agents"):
        if key not in doc:
            raise ConfigError(f"configuration is missing required key '{key}'")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigError(f"n must be an integer, got {n!r}")
    agents_raw = doc["agents"]
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ConfigError("agents must be a non-empty list")

    params = MarketParams(
        n=n,
        J=len(agents_raw),
        rho=float(doc["rho"]),
        a0=float(doc["a0"]),
        sigma=float(doc["sigma"]),
    )

    beliefs = []
    for j, raw in enumerate(agents_raw):
        label = f"agent {j + 1}"
        if not isinstance(raw, dict) or "gamma" not in raw or "B" not in raw:
            raise ConfigError(f"{label}: each agent needs 'gamma' and 'B'")
        B = _as_matrix(raw["B"], n, label)
        _check_agent_stability(B, label)
        try:
            belief = AgentBelief(B=B, gamma=float(raw["gamma"]))
        except ValidationError as exc:
            raise ValidationError(f"{label}: {exc}") from None
        beliefs.append(belief)
    return params, beliefs


def load_config(path) -> tuple[MarketParams, list[AgentBelief]]:
    """Read and validate a JSON configuration file."""
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return parse_config(doc)


def read_config_doc(path) -> dict:
    """Raw config document, for sections owned by other modules."""
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    return doc

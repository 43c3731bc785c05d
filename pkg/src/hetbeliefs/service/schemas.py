"""Request and response models for the HTTP service.

The economy configuration travels as the raw JSON object from the config
file; semantic validation (shapes, eigenvalues, positivity) happens in
the core model layer so the service and the library report identical
errors.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class ConfigRequest(BaseModel):
    config: dict = Field(description="economy configuration document")


class CovPathRequest(ConfigRequest):
    agent: int = Field(default=1, ge=1, description="1-based agent index")
    t_end: float = 5.0
    dt: float | None = None


class SimulateRequest(ConfigRequest):
    seed: int | None = None
    n_paths: int | None = None
    dt: float | None = None
    summary: bool = False


class RatePathRequest(ConfigRequest):
    seed: int | None = None
    n_paths: int | None = None
    dt: float | None = None


class RiccatiRequest(ConfigRequest):
    tau_max: float | None = None
    dtau: float | None = None


class PriceRequest(ConfigRequest):
    zbar: list[float] | None = None
    t_max: float | None = None
    tau_max: float | None = None
    dtau: float | None = None
    quad_points: int | None = None


class VerifyVTRequest(ConfigRequest):
    seed: int = 7
    n_paths: int = 20000
    dt: float = 1e-3
    taus: list[float] | None = None
    thetas: list[float] | None = None
    zbar: list[float] | None = None


class VerifyAllRequest(BaseModel):
    seed: int = 7
    quick: bool = False


class HealthResponse(BaseModel):
    status: str
    version: str


class TableResponse(BaseModel):
    columns: list[str]
    rows: list[list[float | int | str]]


class PriceResponse(BaseModel):
    S: float
    S_truncated: float
    tail_estimate: float
    error_estimate: float
    T_max: float
    tau_grid_size: int


class CheckModel(BaseModel):
    cid: str
    name: str
    passed: bool
    detail: str
    measured: dict[str, float]


class VerifyAllResponse(BaseModel):
    seed: int
    quick: bool
    passed: bool
    checks: list[CheckModel]

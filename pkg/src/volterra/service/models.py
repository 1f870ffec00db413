"""Request and response bodies for the HTTP service.

Configurations travel as raw text in the requests and CSV payloads come
back verbatim in the responses, so a client that writes them to disk gets
byte-identical artifacts whether it runs in-process or against a remote
server.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

__all__ = [
    "ExprEvalRequest",
    "ExprEvalResponse",
    "CheckSection",
    "CheckRequest",
    "CheckResponse",
    "WeightsRequest",
    "ScheduleRowModel",
    "WeightsResponse",
    "SolveOverrides",
    "SolveRequest",
    "SolveResponse",
    "ExampleRequest",
    "ComparisonModel",
    "ExampleResponse",
    "ErrorModel",
]


class ExprEvalRequest(BaseModel):
    expression: str
    bindings: dict[str, float] = Field(default_factory=dict)


class ExprEvalResponse(BaseModel):
    value: float


class CheckSection(BaseModel):
    name: str
    passed: bool
    detail: str
    items: list[str] = Field(default_factory=list)


class CheckRequest(BaseModel):
    config_text: str
    n: int | None = None
    samples: int = 200
    seed: int = 0
    margin_members: int | None = None


class CheckResponse(BaseModel):
    passed: bool
    sections: list[CheckSection]


class WeightsRequest(BaseModel):
    config_text: str
    n_max: int | None = None


class ScheduleRowModel(BaseModel):
    n: int
    L: float
    Lhat: float
    a: float
    k: float
    r: float
    phi_b: float
    phi_eta: float


class WeightsResponse(BaseModel):
    csv: str
    start: int
    rows: list[ScheduleRowModel]


class SolveOverrides(BaseModel):
    n: int | None = None
    h: float | None = None
    tol_fix: float | None = None
    max_iter: int | None = None
    strategy: str | None = None


class SolveRequest(BaseModel):
    config_text: str
    schedule_csv: str | None = None
    overrides: SolveOverrides = Field(default_factory=SolveOverrides)


class SolveResponse(BaseModel):
    csv: str
    summary: str
    n: int
    strategy: str
    iterations: int
    converged: bool
    residual: float
    contraction_ratio: float | None
    deltas: list[float]
    schedule_csv: str


class ExampleRequest(BaseModel):
    name: str
    f: str | None = None
    zero_boundary: bool = False
    traces: dict[str, str] = Field(default_factory=dict)
    corner: float = 0.0
    lam: float | None = None
    amplitude: float | None = None
    n: int | None = None
    h: float | None = None
    solve: bool = True


class ComparisonModel(BaseModel):
    reference: str
    max_error: float
    tolerance: float
    passed: bool


class ExampleResponse(BaseModel):
    name: str
    config_text: str
    summary: str
    csv: str | None = None
    comparison: ComparisonModel | None = None
    solve: SolveResponse | None = None


class ErrorModel(BaseModel):
    error: str
    message: str

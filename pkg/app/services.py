import json

from fastapi import HTTPException
from pydantic import BaseModel, ConfigDict, ValidationError

from core.errors import DimensionMismatch, UpsilonLabError
from core.models import ConfigurationFile
from core.point_config import configuration_from_model
from lab.builtins import list_builtins
from lab.runner import jsonable, parse_run_config, run
from lab.transport import d_upsilon, optimal_matching


class DistanceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: ConfigurationFile
    eta: ConfigurationFile


class DistanceResponse(BaseModel):
    d: float | str
    matching: list[list[int]] | None


class RunResponse(BaseModel):
    verdict: dict
    body: str
    body_format: str


def read_builtins() -> dict:
    return list_builtins()


def compute_distance(request: DistanceRequest) -> DistanceResponse:
    gamma = configuration_from_model(request.gamma)
    eta = configuration_from_model(request.eta)
    try:
        d = d_upsilon(gamma, eta)
    except DimensionMismatch as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    matching = optimal_matching(gamma, eta).to_json() if d.is_finite else None
    return DistanceResponse(d=d.to_json(), matching=matching)


def execute_run(payload: dict) -> RunResponse:
    try:
        config = parse_run_config(payload)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=json.loads(e.json())) from e
    try:
        record = run(config)
    except (UpsilonLabError, ValueError, RuntimeError) as e:
        raise HTTPException(status_code=400, detail=f"{type(e).__name__}: {e}") from e
    return RunResponse(verdict=jsonable(record.verdict()), body=record.body, body_format=record.body_format)

from fastapi import APIRouter, Body

from app.services import DistanceRequest, DistanceResponse, RunResponse, compute_distance, execute_run, read_builtins

router = APIRouter()


@router.get("/builtins")
def get_builtins() -> dict:
    return read_builtins()


@router.post("/distance", response_model=DistanceResponse)
def post_distance(request: DistanceRequest):
    return compute_distance(request)


@router.post("/runs", response_model=RunResponse)
def post_runs(config: dict = Body(...)):
    return execute_run(config)

from fastapi import FastAPI

from app.routes import router
from config import ARTIFACT_VERSION

app = FastAPI(
    title="upsilon-lab API",
    description="Read-only API over the upsilon-lab catalog, transport distance and lab runs.",
    version=ARTIFACT_VERSION,
)

app.include_router(router)

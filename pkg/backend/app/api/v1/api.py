"""
API v1 router configuration.
"""
from fastapi import APIRouter

from app.api.v1.endpoints import analysis

api_router = APIRouter()

# Analysis endpoints
api_router.include_router(
    analysis.router,
    prefix="/analysis",
    tags=["analysis"]
)

"""
tzhash search API - FastAPI application

Serves a trained hash function and a database of binary codes for Hamming-space retrieval.
"""

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Depends

from . import __version__
from .config import get_settings
from .routers import search_router
from .services.search_service import SearchService, get_search_service, search_service

logger = logging.getLogger(__name__)
settings = get_settings()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifecycle management."""
    # Startup: load model and index named in the settings
    search_service.load(settings.checkpoint_path, settings.codes_path, settings.max_code_bits)
    if not search_service.ready:
        logger.warning("no code index configured (TZSH_CODES_PATH); search endpoints will return 503")
    logger.info(f"tzhash search API started on {settings.host}:{settings.port}")

    yield

    logger.info("tzhash search API shutting down")


app = FastAPI(
    title="tzhash search API",
    description="""
    Hamming-space retrieval over binary codes learned by transductive zero-shot hashing.

    - **Search**: rank the database by Hamming distance for feature vectors or raw codes
    """,
    version=__version__,
    lifespan=lifespan,
)

API_PREFIX = "/api/v1"

app.include_router(search_router, prefix=API_PREFIX)


@app.get("/")
async def root(service: SearchService = Depends(get_search_service)):
    """Root endpoint - API status check."""
    return {
        "name": "tzhash search API",
        "version": __version__,
        "status": "running",
        "index_size": len(service.index) if service.index is not None else 0,
        "code_bits": service.index.n_bits if service.index is not None else None,
    }


@app.get("/health")
async def health_check():
    """Health check endpoint for monitoring."""
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "tzhash.main:app",
        host=settings.host,
        port=settings.port,
        reload=settings.debug
    )

"""
Hamming search API endpoints.
"""

from fastapi import APIRouter, Depends, HTTPException, status

from ..exceptions import DataError, DimensionError
from ..schemas.search import CodeSearchRequest, FeatureSearchRequest, SearchResponse
from ..services.search_service import SearchService, get_search_service

router = APIRouter(prefix="/search", tags=["Search"])


def _require_index(service: SearchService) -> None:
    if not service.ready:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="No code index loaded"
        )


@router.post("", response_model=SearchResponse)
async def search_features(
    request: FeatureSearchRequest,
    service: SearchService = Depends(get_search_service)
):
    """
    Encode feature vectors with the loaded model and rank the index by Hamming distance.

    - **top_k**: maximum hits per query
    - **radius**: if set, only hits within this Hamming distance
    """
    _require_index(service)
    if service.params is None:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="No checkpoint loaded; only code search is available"
        )
    try:
        queries = service.encode_features(request.features)
    except (DataError, DimensionError) as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    if queries.n_bits != service.index.n_bits:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"model emits {queries.n_bits}-bit codes, index holds {service.index.n_bits}-bit codes"
        )
    return SearchResponse(results=service.search(queries, request.top_k, request.radius))


@router.post("/codes", response_model=SearchResponse)
async def search_codes(
    request: CodeSearchRequest,
    service: SearchService = Depends(get_search_service)
):
    """Rank the index against raw bitstring queries."""
    _require_index(service)
    try:
        queries = service.codes_from_strings(request.codes)
        return SearchResponse(results=service.search(queries, request.top_k, request.radius))
    except DimensionError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))

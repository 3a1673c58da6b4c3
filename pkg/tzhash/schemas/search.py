"""
Search API schemas for request/response validation.
"""

from typing import List, Optional

from pydantic import BaseModel, Field


class FeatureSearchRequest(BaseModel):
    """Encode feature vectors with the loaded model and search the index."""

    features: List[List[float]] = Field(..., min_length=1)
    top_k: int = Field(10, ge=1)
    radius: Optional[int] = Field(None, ge=0)


class CodeSearchRequest(BaseModel):
    """Search the index with raw bitstrings such as ``"0110"``."""

    codes: List[str] = Field(..., min_length=1)
    top_k: int = Field(10, ge=1)
    radius: Optional[int] = Field(None, ge=0)


class SearchHit(BaseModel):
    index: int
    label: Optional[int] = None
    distance: int


class QueryResult(BaseModel):
    code: str
    hits: List[SearchHit] = []


class SearchResponse(BaseModel):
    results: List[QueryResult] = []

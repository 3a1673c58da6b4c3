"""
Search service: a trained hash function plus an immutable CodeIndex.
"""

import logging
from typing import List, Optional

import numpy as np

from ..exceptions import DataError, DimensionError
from ..models.batch import FeatureBatch
from ..models.code_index import UNKNOWN_LABEL, CodeIndex, load_codes, parse_bitstring
from ..models.params import ParamStore
from ..schemas.search import QueryResult, SearchHit
from . import backbone, retrieval
from .trainer import encode

logger = logging.getLogger(__name__)


class SearchService:
    """Holds the loaded model and database codes."""

    def __init__(self, params: Optional[ParamStore] = None, index: Optional[CodeIndex] = None):
        self.params = params
        self.index = index

    @property
    def ready(self) -> bool:
        return self.index is not None

    def load(self, checkpoint_path: Optional[str], codes_path: Optional[str], max_code_bits: int = 1024) -> None:
        if checkpoint_path:
            self.params = ParamStore.load(checkpoint_path)
            logger.info(f"loaded checkpoint {checkpoint_path} (step {self.params.step})")
        if codes_path:
            index = load_codes(codes_path)
            if index.n_bits > max_code_bits:
                raise DataError(f"{codes_path}: {index.n_bits}-bit codes exceed the {max_code_bits}-bit limit")
            self.index = index
            logger.info(f"loaded {len(index)} codes of {index.n_bits} bits from {codes_path}")

    def encode_features(self, features: List[List[float]]) -> CodeIndex:
        if self.params is None:
            raise DataError("no checkpoint loaded; only code search is available")
        width = backbone.input_width(self.params)
        try:
            x = np.asarray(features, dtype=np.float64)
        except ValueError:
            raise DimensionError(f"features must be rows of width {width}")
        if x.ndim != 2 or x.shape[1] != width:
            raise DimensionError(f"features must be rows of width {width}")
        if not np.all(np.isfinite(x)):
            raise DimensionError("features contain non-finite values")
        return retrieval.binarize(encode(self.params, FeatureBatch.unlabeled(x)))

    def codes_from_strings(self, codes: List[str]) -> CodeIndex:
        try:
            bits = [parse_bitstring(c) for c in codes]
        except ValueError as e:
            raise DimensionError(str(e))
        if len({b.size for b in bits}) != 1:
            raise DimensionError("query codes differ in length")
        return CodeIndex.from_bits(np.stack(bits))

    def search(self, queries: CodeIndex, top_k: int, radius: Optional[int] = None) -> List[QueryResult]:
        if self.index is None:
            raise DataError("no code index loaded")
        ranked = retrieval.search(queries, self.index, top_k, radius)
        results = []
        for code, hits in zip(queries.bitstrings(), ranked):
            results.append(QueryResult(
                code=code,
                hits=[
                    SearchHit(
                        index=j,
                        label=None if self.index.labels[j] == UNKNOWN_LABEL else int(self.index.labels[j]),
                        distance=d,
                    )
                    for j, d in hits
                ],
            ))
        return results


# Singleton instance
search_service = SearchService()


def get_search_service() -> SearchService:
    """Dependency for getting the search service."""
    return search_service

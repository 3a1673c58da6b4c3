# Models package
from .params import ParamStore
from .batch import FeatureBatch, Stream, load_features, write_features
from .vocabulary import ClassVocabulary, load_vocabulary, write_vocabulary
from .code_index import CodeIndex, load_codes, write_codes

__all__ = [
    "ParamStore",
    "FeatureBatch",
    "Stream",
    "load_features",
    "write_features",
    "ClassVocabulary",
    "load_vocabulary",
    "write_vocabulary",
    "CodeIndex",
    "load_codes",
    "write_codes",
]

"""
Shared two-stream network: one MLP embeds both the labelled source stream and the
unlabeled stream into the common representation space.
"""

import logging
from typing import List, Tuple

import numpy as np

from ..exceptions import DataError, DimensionError
from ..models.batch import FeatureBatch, Stream
from ..models.params import ParamStore
from ..schemas.config import BackboneConfig
from ..utils import diffcore
from ..utils.diffcore import Tape, Var

logger = logging.getLogger(__name__)

PREFIX = "backbone"


def layer_names(i: int) -> Tuple[str, str]:
    return f"{PREFIX}.{i}.W", f"{PREFIX}.{i}.b"


def init_backbone(params: ParamStore, config: BackboneConfig, rng: np.random.Generator) -> None:
    """Xavier-uniform weights and zero biases for every layer."""
    fan_in = config.d_in
    for i, width in enumerate(config.widths):
        w_name, b_name = layer_names(i)
        params.add(w_name, diffcore.xavier_uniform(rng, fan_in, width))
        params.add(b_name, np.zeros((1, width)))
        fan_in = width


def n_layers(params: ParamStore) -> int:
    n = 0
    while layer_names(n)[0] in params:
        n += 1
    if n == 0:
        raise DataError("parameter store holds no backbone layers")
    return n


def input_width(params: ParamStore) -> int:
    return params[layer_names(0)[0]].shape[0]


def output_width(params: ParamStore) -> int:
    return params[layer_names(n_layers(params) - 1)[0]].shape[1]


def _check_batch(batch: FeatureBatch, params: ParamStore) -> None:
    if len(batch) == 0:
        raise DataError(f"empty stream: {batch.stream.value} batch has no rows")
    if batch.width != input_width(params):
        raise DimensionError(
            f"{batch.stream.value} features have width {batch.width}, backbone expects {input_width(params)}"
        )


def embed(batch: FeatureBatch, params: ParamStore) -> np.ndarray:
    """f = ψ(x). The stream tag is never consulted, so both streams share every weight."""
    _check_batch(batch, params)
    h = batch.features
    layers = n_layers(params)
    for i in range(layers):
        w_name, b_name = layer_names(i)
        h = diffcore.linear(h, params[w_name], params[b_name])
        if i < layers - 1:
            h = diffcore.relu(h)
    return h


def embed_pair(src: FeatureBatch, unl: FeatureBatch, params: ParamStore) -> Tuple[np.ndarray, np.ndarray]:
    if src.stream is not Stream.SOURCE or unl.stream is not Stream.UNLABELED:
        raise DataError("embed_pair expects (source, unlabeled) batches")
    _check_batch(src, params)
    _check_batch(unl, params)
    return embed(src, params), embed(unl, params)


def embed_on_tape(tape: Tape, x: np.ndarray, params: ParamStore) -> Var:
    h = tape.constant(x)
    layers = n_layers(params)
    for i in range(layers):
        w_name, b_name = layer_names(i)
        h = tape.linear(h, tape.param(params, w_name), tape.param(params, b_name))
        if i < layers - 1:
            h = tape.relu(h)
    return h


def embed_pair_on_tape(
    tape: Tape, src: FeatureBatch, unl: FeatureBatch, params: ParamStore
) -> Tuple[Var, Var]:
    """Training-time embed_pair: both streams read the same parameter buffers."""
    if src.stream is not Stream.SOURCE or unl.stream is not Stream.UNLABELED:
        raise DataError("embed_pair expects (source, unlabeled) batches")
    _check_batch(src, params)
    _check_batch(unl, params)
    return embed_on_tape(tape, src.features, params), embed_on_tape(tape, unl.features, params)


def widths(params: ParamStore) -> List[int]:
    return [params[layer_names(i)[0]].shape[1] for i in range(n_layers(params))]

"""
RecNet Model

This module provides the encoder-decoder-reconstructor:
- Parameter groups and model dimensions
- Attention decoder (teacher forcing, single steps, traces)
- Beam search and greedy decoding
- Global and local reconstructors with their losses
- The joint lambda-weighted objective
"""

from src.model.params import ContextMode, DecoderParams, ModelDims, ReconstructorParams, Variant
from src.model.decoder import DecoderTrace, attention_context, decode_step, teacher_forced_nll
from src.model.beam import Hypothesis, beam_search, greedy_decode
from src.model.reconstructor import (
    ReconstructionTrace,
    global_loss,
    local_loss,
    mean_pool,
    reconstruct_global,
    reconstruct_local,
)
from src.model.recnet import GRADCHECK_TOLERANCE, LossBreakdown, gradcheck_recnet, recnet_loss

__all__ = [
    "ContextMode",
    "DecoderParams",
    "ModelDims",
    "ReconstructorParams",
    "Variant",
    "DecoderTrace",
    "attention_context",
    "decode_step",
    "teacher_forced_nll",
    "Hypothesis",
    "beam_search",
    "greedy_decode",
    "ReconstructionTrace",
    "global_loss",
    "local_loss",
    "mean_pool",
    "reconstruct_global",
    "reconstruct_local",
    "LossBreakdown",
    "recnet_loss",
    "GRADCHECK_TOLERANCE",
    "gradcheck_recnet",
]

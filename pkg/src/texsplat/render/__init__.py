from .backward import PixelGrads, RenderGradients, render_backward
from .common import TILE, mode_id, prepare_frame
from .forward import RenderOutput, render_forward
from .reference import render_reference

__all__ = [
    "PixelGrads", "RenderGradients", "RenderOutput", "TILE",
    "mode_id", "prepare_frame", "render_backward", "render_forward",
    "render_reference",
]

from .cameras import CameraSchemaError, read_cameras, write_cameras
from .metrics import l1_metric, psnr
from .ply import PlyParseError, read_ply, write_ply
from .synthetic import Dataset, checkerboard, load_dataset, make_synthetic_dataset
from . import texio

__all__ = [
    "CameraSchemaError", "Dataset", "PlyParseError", "checkerboard",
    "l1_metric", "load_dataset", "make_synthetic_dataset", "psnr",
    "read_cameras", "read_ply", "texio", "write_cameras", "write_ply",
]

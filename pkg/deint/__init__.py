from .frames import Field, Frame, Parity, interlace, split_fields, weave
from .model import DeinterlaceNet, build_net, deinterlace_frame, load_weights, save_weights

__all__ = [
    "DeinterlaceNet",
    "Field",
    "Frame",
    "Parity",
    "build_net",
    "deinterlace_frame",
    "interlace",
    "load_weights",
    "save_weights",
    "split_fields",
    "weave",
]

"""Class activation maps from the composed linear head.

The head applies two linear maps with no nonlinearity between them (fc then
classifier), so their composition is itself linear and the classic CAM
construction applies exactly: per-class channel weights fold through both
layers onto the final pre-pool conv map.
"""

from dataclasses import dataclass

import numpy as np

from ..geo.ppm import write_pgm
from ..model.config import DamConfig
from ..model.network import DamParams, forward
from ..model.training import batch_tensor


class CamError(ValueError):
    """Raised for bad class indices or malformed images."""


@dataclass
class CamMap:
    """One class's activation map, upsampled to input size, in [0, 1]."""

    values: np.ndarray  # [H, W] float64
    class_index: int
    constant: bool      # raw map had no variation; values are all zero

    def to_pgm(self, path) -> None:
        """Grayscale export, 255 = max activation."""
        write_pgm(path, np.round(self.values * 255.0).astype(np.uint8))


def bilinear_upsample(src: np.ndarray, out_hw) -> np.ndarray:
    """Align-corners bilinear interpolation of a 2-D map."""
    h, w = src.shape
    H, W = out_hw
    if H < 1 or W < 1:
        raise CamError(f"bad output size {out_hw}")
    # axis positions: corners map to corners; a single row/col broadcasts
    ys = np.linspace(0.0, h - 1.0, H) if H > 1 else np.zeros(1)
    xs = np.linspace(0.0, w - 1.0, W) if W > 1 else np.zeros(1)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, max(h - 2, 0))
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, max(w - 2, 0))
    wy = (ys - y0).reshape(-1, 1)
    wx = (xs - x0).reshape(1, -1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    return (a * (1 - wy) * (1 - wx) + b * (1 - wy) * wx
            + c * wy * (1 - wx) + d * wy * wx)


def effective_class_weights(params: DamParams, class_index: int) -> np.ndarray:
    """classifier ∘ fc folded into one weight vector over head channels."""
    w_cls = params["head.classifier.weight"].data  # [K, d]
    w_fc = params["head.fc.weight"].data           # [d, C]
    if not 0 <= class_index < w_cls.shape[0]:
        raise CamError(f"class index {class_index} out of range for K={w_cls.shape[0]}")
    return w_cls[class_index] @ w_fc                # [C]


def cam(image: np.ndarray, params: DamParams, config: DamConfig,
        class_index: int) -> CamMap:
    """Activation map for one class over one RGB image.

    The raw map is bilinearly upsampled to the input size first and
    min-max normalized second, so the output's extremes are exactly 0 and
    1 whenever the raw map is not constant.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise CamError(f"expected an RGB image [H, W, 3], got shape {img.shape}")
    x = batch_tensor(img.transpose(2, 0, 1)[None])
    trace = forward(x, params, config)
    weights = effective_class_weights(params, class_index)
    raw = np.einsum("c,chw->hw", weights, trace.cam_map.data[0])
    up = bilinear_upsample(raw, (img.shape[0], img.shape[1]))
    lo, hi = float(up.min()), float(up.max())
    if hi == lo:
        return CamMap(values=np.zeros_like(up), class_index=class_index,
                      constant=True)
    return CamMap(values=(up - lo) / (hi - lo), class_index=class_index,
                  constant=False)

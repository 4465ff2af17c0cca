"""Per-pixel partial derivatives via Gaussian-derivative convolution, and
the five local affine differential invariant fields built from them.

``gaussian_kernel`` returns the plain sampled Gaussian-derivative kernels.
``derivative_stack`` uses discretely *moment-corrected* versions of those
kernels (zero sum, unit response to the monomial each operator is meant to
differentiate), so that a linear ramp yields its exact gradient and a
constant image yields exactly zero fields.  The plain smoothing kernel is
deliberately left unnormalized; its truncation deficit cancels between an
image and its warped variants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import Raster

_SUPPORTED_ORDERS = {(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)}

_BOUNDARY_MODES = {"reflect": "reflect", "zero": "constant"}


@dataclass(frozen=True)
class DiffConfig:
    """Gaussian differentiation settings (sigma in pixels)."""

    sigma: float = 3.0
    kernel_size: int = 9
    boundary: str = "reflect"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 3")
        if self.boundary not in _BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {sorted(_BOUNDARY_MODES)}")

    @property
    def mode(self) -> str:
        return _BOUNDARY_MODES[self.boundary]


def _offsets(kernel_size: int) -> np.ndarray:
    half = kernel_size // 2
    return np.arange(-half, half + 1, dtype=np.float64)


def gaussian_kernel(order_x: int, order_y: int, config: DiffConfig) -> np.ndarray:
    """Sampled 2-D Gaussian kernel differentiated order_x/order_y times.

    Entries are the closed-form Gaussian derivatives evaluated at integer
    offsets from the kernel center.  Axis convention: the first array axis
    is y (rows), the second is x (columns).
    """
    if (order_x, order_y) not in _SUPPORTED_ORDERS:
        raise ValueError(f"unsupported derivative orders ({order_x}, {order_y})")
    s2 = config.sigma ** 2
    u = _offsets(config.kernel_size)
    xs = u[None, :]
    ys = u[:, None]
    g = np.exp(-(xs ** 2 + ys ** 2) / (2.0 * s2)) / (2.0 * np.pi * s2)
    if (order_x, order_y) == (0, 0):
        return g
    if (order_x, order_y) == (1, 0):
        return -xs / s2 * g
    if (order_x, order_y) == (0, 1):
        return -ys / s2 * g
    if (order_x, order_y) == (2, 0):
        return (xs ** 2 - s2) / s2 ** 2 * g
    if (order_x, order_y) == (0, 2):
        return (ys ** 2 - s2) / s2 ** 2 * g
    return xs * ys / s2 ** 2 * g


def _corrected_1d(order: int, config: DiffConfig) -> np.ndarray:
    """1-D sampled Gaussian (derivative) corrected for truncation so that the
    discrete moment responses are exact:

    order 0: sum 1; order 1: zero sum, response to x equal 1;
    order 2: zero sum, response to x^2 equal 2.
    """
    u = _offsets(config.kernel_size)
    s2 = config.sigma ** 2
    g = np.exp(-u ** 2 / (2.0 * s2))
    if order == 0:
        return g / g.sum()
    if order == 1:
        k = -u / s2 * g
        return k / float((-u * k).sum())
    if order == 2:
        k = (u ** 2 - s2) / s2 ** 2 * g
        # a*k + b with zero sum and second moment 2
        n = len(u)
        s0, s2k = float(k.sum()), float((u ** 2 * k).sum())
        su2 = float((u ** 2).sum())
        a = 2.0 / (s2k - su2 * s0 / n)
        b = -a * s0 / n
        return a * k + b
    raise ValueError(f"unsupported 1-D derivative order {order}")


def derivative_kernel(order_x: int, order_y: int, config: DiffConfig) -> np.ndarray:
    """Moment-corrected separable derivative kernel used by the stack."""
    if (order_x, order_y) not in _SUPPORTED_ORDERS or (order_x, order_y) == (0, 0):
        raise ValueError(f"unsupported derivative orders ({order_x}, {order_y})")
    kx = _corrected_1d(order_x, config)
    ky = _corrected_1d(order_y, config)
    return np.outer(ky, kx)


def convolve(src, kernel: np.ndarray, boundary: str = "reflect") -> np.ndarray:
    """True 2-D convolution (kernel flipped) with same-size output."""
    arr = src.pixels if isinstance(src, Raster) else np.asarray(src, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape[0] > arr.shape[0] or kernel.shape[1] > arr.shape[1]:
        raise ValueError(f"kernel {kernel.shape} larger than image {arr.shape}")
    if boundary not in _BOUNDARY_MODES:
        raise ValueError(f"boundary must be one of {sorted(_BOUNDARY_MODES)}")
    return ndimage.convolve(arr, kernel, mode=_BOUNDARY_MODES[boundary], cval=0.0)


@dataclass(frozen=True)
class DerivativeStack:
    """First and second partial-derivative fields of one raster."""

    fx: np.ndarray
    fy: np.ndarray
    fxx: np.ndarray
    fxy: np.ndarray
    fyy: np.ndarray
    config: DiffConfig

    @property
    def shape(self) -> tuple[int, int]:
        return self.fx.shape


def derivative_stack(src: Raster, config: DiffConfig = DiffConfig()) -> DerivativeStack:
    """Compute the five derivative fields of ``src`` by Gaussian filtering."""
    if src.height < config.kernel_size or src.width < config.kernel_size:
        raise ValueError(
            f"image {src.height}x{src.width} smaller than kernel size {config.kernel_size}")
    fields = {}
    for name, (ox, oy) in (("fx", (1, 0)), ("fy", (0, 1)),
                           ("fxx", (2, 0)), ("fxy", (1, 1)), ("fyy", (0, 2))):
        fields[name] = convolve(src, derivative_kernel(ox, oy, config), config.boundary)
    return DerivativeStack(config=config, **fields)


@dataclass(frozen=True)
class ADIFields:
    """The five local affine differential invariants, evaluated per pixel
    with centroid-centered coordinates."""

    adi1: np.ndarray
    adi2: np.ndarray
    adi3: np.ndarray
    adi4: np.ndarray
    adi5: np.ndarray


def adi_values(x, y, fx, fy, fxx, fxy, fyy):
    """Evaluate the five differential invariants from derivative values.

    Accepts scalars or broadcastable arrays; ``x``/``y`` must already be
    centered on the reference point (the centroid for image work).
    """
    adi1 = x * fx + y * fy
    adi2 = x * x * fxx + 2.0 * x * y * fxy + y * y * fyy
    adi3 = x * fy * fxx + (y * fy - x * fx) * fxy - y * fx * fyy
    adi4 = fxx * fyy - fxy * fxy
    adi5 = fy * fy * fxx - 2.0 * fx * fy * fxy + fx * fx * fyy
    return adi1, adi2, adi3, adi4, adi5


def adi_fields(stack: DerivativeStack, centroid: tuple[float, float]) -> ADIFields:
    """Evaluate the invariant fields over the full pixel grid."""
    h, w = stack.shape
    ys, xs = np.mgrid[0.0:h, 0.0:w]
    x = xs + 0.5 - centroid[0]
    y = ys + 0.5 - centroid[1]
    a1, a2, a3, a4, a5 = adi_values(x, y, stack.fx, stack.fy,
                                    stack.fxx, stack.fxy, stack.fyy)
    return ADIFields(a1, a2, a3, a4, a5)

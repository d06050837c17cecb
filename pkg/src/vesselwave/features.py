"""Per-pixel feature stacks and the per-image normal transformation.

A feature stack holds one plane per feature: plane 0 is the working
(inverted, border-extended) intensity and plane i >= 1 the maximum Morlet
response modulus at the i-th configured scale.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DatasetError, ParameterError
from .wavelet import max_modulus

STACK_MAGIC = b"VWFS"

# Below this population standard deviation a feature is considered
# degenerate and zeroed instead of divided.
DEGENERATE_STD = 1e-12


@dataclass
class FeatureStack:
    """Planes of per-pixel features, shape (n_features, H, W)."""

    planes: np.ndarray
    scales: tuple = None

    @property
    def n_features(self):
        return self.planes.shape[0]

    @property
    def shape(self):
        return self.planes.shape[1:]

    def pixels(self, mask=None):
        """Flatten to (n_pixels, n_features) sample rows, optionally masked."""
        if mask is None:
            return self.planes.reshape(self.n_features, -1).T
        return self.planes[:, mask].T


@dataclass
class NormalizationStats:
    """Per-feature mean/std used by the normal transformation."""

    means: np.ndarray
    stds: np.ndarray
    degenerate: np.ndarray


def build_stack(img, mask, params, scales=(2.0, 3.0, 4.0, 6.0)):
    """Assemble the feature stack for a pre-processed image.

    Parameters
    ----------
    img : numpy.ndarray
        Inverted, border-extended working intensity.
    mask : numpy.ndarray
        Boolean mask matching ``img``; used for shape validation only, the
        planes always cover the full raster.
    params : MorletParams
        Wavelet configuration shared by all scales.
    scales : sequence of float
        Wavelet scales in pixels, each >= 1.

    Returns
    -------
    FeatureStack
        1 + len(scales) planes.
    """
    scales = tuple(float(s) for s in scales)
    if len(scales) == 0:
        raise ParameterError("scales must be nonempty")
    if any(s < 1.0 for s in scales):
        raise ParameterError(f"scales must each be >= 1, got {scales}")
    img = np.asarray(img, dtype=np.float64)
    if mask is not None and np.shape(mask) != img.shape:
        raise DatasetError(f"mask shape {np.shape(mask)} != image shape {img.shape}")
    planes = np.empty((1 + len(scales),) + img.shape, dtype=np.float64)
    planes[0] = img
    for i, scale in enumerate(scales):
        planes[1 + i] = max_modulus(img, params, scale)
    return FeatureStack(planes=planes, scales=scales)


def normalize(stack, mask):
    """Apply the per-image normal transformation (z-scoring) to a stack.

    Each feature's mean and population standard deviation are estimated over
    the pixels selected by ``mask`` (normally the pre-processing-grown
    aperture) and the transformation is applied to every pixel of the plane.
    Features whose masked standard deviation falls below ``DEGENERATE_STD``
    are zeroed and flagged.

    Returns
    -------
    (FeatureStack, NormalizationStats)
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != stack.shape:
        raise DatasetError(f"mask shape {mask.shape} != stack shape {stack.shape}")
    if not mask.any():
        raise DataError("normalization mask is empty")
    n = stack.n_features
    means = np.empty(n)
    stds = np.empty(n)
    degenerate = np.zeros(n, dtype=bool)
    planes = np.empty_like(stack.planes)
    for i in range(n):
        vals = stack.planes[i][mask]
        means[i] = vals.mean()
        stds[i] = vals.std()
        if stds[i] < DEGENERATE_STD:
            planes[i] = 0.0
            degenerate[i] = True
        else:
            planes[i] = (stack.planes[i] - means[i]) / stds[i]
    stats = NormalizationStats(means=means, stds=stds, degenerate=degenerate)
    return FeatureStack(planes=planes, scales=stack.scales), stats


def write_stack(path, stack):
    """Export a stack as little-endian float32 planes behind a 16-byte header.

    Header layout: 4-byte magic ``VWFS`` then width, height and n_features
    as little-endian uint32.  Plane data follows plane-major, row-major.
    Intended for cross-checking feature values between implementations.
    """
    h, w = stack.shape
    with open(path, "wb") as fh:
        fh.write(STACK_MAGIC)
        fh.write(struct.pack("<III", w, h, stack.n_features))
        fh.write(stack.planes.astype("<f4").tobytes())


def read_stack(path):
    """Read a stack written by :func:`write_stack`.

    The file format does not carry scale metadata, so ``scales`` is None on
    the returned stack, and values round-trip at float32 precision.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != STACK_MAGIC:
            raise DataError(f"{path} is not a feature-stack file")
        w, h, n = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h * n:
        raise DataError(f"{path} is truncated")
    planes = data.reshape(n, h, w).astype(np.float64)
    return FeatureStack(planes=planes, scales=None)

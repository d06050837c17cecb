"""Image and mask I/O plus aperture-aware pre-processing.

Images are plain ``float64`` arrays with values in ``[0, 1]``; field-of-view
(FOV) masks are boolean arrays of the same shape with ``True`` inside the
camera aperture.  Supported raster formats are PNG, PPM and PGM; anything
else (JPEG, TIFF, GIF) must be converted beforehand.
"""

import os

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import DataError, DatasetError, ParameterError

SUPPORTED_EXTENSIONS = (".png", ".ppm", ".pgm")

CHANNELS = ("red", "green", "blue", "gray")

_LUMA = (0.299, 0.587, 0.114)


def _read_raster(path):
    """Decode a raster file to a float array scaled to [0, 1].

    Returns a (H, W) array for grayscale files or a (H, W, 3) array for
    color files.  8-bit samples are divided by 255, 16-bit grayscale
    samples by 65535.
    """
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in SUPPORTED_EXTENSIONS:
        raise DataError(
            f"unsupported image format {ext!r} for {path}; "
            "convert to PNG/PPM/PGM first"
        )
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode == "1":
                im = im.convert("L")
            if im.mode in ("P", "RGBA", "LA"):
                im = im.convert("RGB")
            if im.mode in ("I", "I;16", "I;16B", "I;16L"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            elif im.mode == "L":
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif im.mode == "RGB":
                arr = np.asarray(im, dtype=np.float64) / 255.0
            else:
                raise DataError(f"unsupported pixel mode {im.mode!r} in {path}")
    except (OSError, SyntaxError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return arr


def load_channel(path, channel="green"):
    """Load one working channel of a raster file, scaled to [0, 1].

    Parameters
    ----------
    path : str or Path
        PNG/PPM/PGM file to read.
    channel : {'red', 'green', 'blue', 'gray'}
        Channel to extract from color inputs.  Grayscale inputs ignore
        the selection.  ``'gray'`` uses Rec. 601 luma on color inputs.

    Returns
    -------
    numpy.ndarray
        (H, W) float64 array with values in [0, 1].
    """
    if channel not in CHANNELS:
        raise ParameterError(f"channel must be one of {CHANNELS}, got {channel!r}")
    arr = _read_raster(path)
    if arr.ndim == 2:
        return arr
    if channel == "gray":
        return arr @ np.asarray(_LUMA)
    idx = {"red": 0, "green": 1, "blue": 2}[channel]
    return np.ascontiguousarray(arr[:, :, idx])


def invert(img):
    """Invert intensities: each value v becomes 1 - v.

    The input must already live in [0, 1]; applying the function twice is
    the identity.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.min() < 0.0 or img.max() > 1.0:
        raise DataError("invert expects values in [0, 1]")
    return 1.0 - img


def load_mask(path):
    """Load a FOV mask file: a pixel is inside iff it exceeds half scale."""
    arr = _read_raster(path)
    if arr.ndim == 3:
        arr = arr @ np.asarray(_LUMA)
    mask = arr > 0.5
    if not mask.any():
        raise DataError(f"mask {path} has no inside pixels")
    return mask


def check_mask_matches(mask, img, name=""):
    """Raise a dataset configuration error if mask/image shapes differ."""
    if mask.shape != img.shape:
        raise DatasetError(
            f"mask dimensions {mask.shape} do not match image {img.shape}"
            + (f" for {name}" if name else "")
        )


def _disk(radius):
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    return (dy * dy + dx * dx) <= radius * radius


def derive_mask(img, threshold=0.1, erosion_radius=3):
    """Derive a FOV mask by thresholding a bright channel.

    Pixels with value strictly above ``threshold`` are taken as inside, then
    the region is eroded by a disk of ``erosion_radius`` pixels to retreat
    from the aperture rim.  Intended for datasets that ship no mask files;
    the red channel is the usual input since it is brightest inside the
    aperture.

    Parameters
    ----------
    img : numpy.ndarray
        (H, W) intensity array in [0, 1].
    threshold : float
        Cut value in (0, 1).
    erosion_radius : int
        Radius of the disk structuring element, in pixels.

    Returns
    -------
    numpy.ndarray
        Boolean FOV mask.
    """
    if not 0.0 < threshold < 1.0:
        raise ParameterError(f"threshold must lie in (0, 1), got {threshold}")
    img = np.asarray(img, dtype=np.float64)
    mask = img > threshold
    if erosion_radius > 0:
        mask = ndimage.binary_erosion(mask, structure=_disk(erosion_radius))
    if not mask.any():
        raise DataError("derived FOV mask is empty")
    return mask


def extend_border(img, mask, iterations):
    """Iteratively grow the aperture to suppress its edge response.

    Per iteration, every pixel outside the mask that is 8-adjacent to at
    least one inside pixel is assigned the mean value of its inside
    8-neighbors and added to the mask.  Pixels inside the mask at call time
    are never modified.  The inside region therefore grows by one 8-connected
    dilation step per iteration.

    Parameters
    ----------
    img : numpy.ndarray
        (H, W) intensity array.
    mask : numpy.ndarray
        Boolean FOV mask, same shape.
    iterations : int
        Number of growth steps; 0 returns copies unchanged.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        Extended image and the grown mask.
    """
    if iterations < 0:
        raise ParameterError("iterations must be >= 0")
    img = np.array(img, dtype=np.float64)
    if not np.isfinite(img).all():
        raise DataError("image contains non-finite values")
    mask = np.array(mask, dtype=bool)
    if mask.shape != img.shape:
        raise DatasetError(f"mask shape {mask.shape} != image shape {img.shape}")
    kernel = np.ones((3, 3))
    kernel[1, 1] = 0.0
    for _ in range(int(iterations)):
        inside = mask.astype(np.float64)
        sums = ndimage.convolve(img * inside, kernel, mode="constant", cval=0.0)
        counts = ndimage.convolve(inside, kernel, mode="constant", cval=0.0)
        fringe = ~mask & (counts > 0.0)
        if not fringe.any():
            break
        img[fringe] = sums[fringe] / counts[fringe]
        mask[fringe] = True
    return img, mask


def write_pgm16(path, values, lo=None, hi=None):
    """Write a real map as a 16-bit binary PGM, linearly rescaled.

    ``lo``/``hi`` default to 0 and the map maximum, which suits modulus and
    posterior maps anchored at zero.  Values are clipped to the range.
    """
    values = np.asarray(values, dtype=np.float64)
    if lo is None:
        lo = 0.0
    if hi is None:
        hi = float(values.max())
    span = hi - lo
    if span <= 0.0:
        scaled = np.zeros(values.shape, dtype=np.uint16)
    else:
        scaled = np.clip((values - lo) / span, 0.0, 1.0)
        scaled = np.round(scaled * 65535.0).astype(np.uint16)
    h, w = scaled.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(scaled.astype(">u2").tobytes())


def write_binary_png(path, mask):
    """Write a boolean map as an 8-bit PNG with values 0 and 255."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(path)


def write_gray_png(path, img):
    """Write a [0, 1] float image as an 8-bit grayscale PNG."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    PILImage.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)

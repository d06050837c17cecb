"""Synthetic fundus-like dataset generator for dataset-free testing.

Each image is a circular aperture on a dark field, filled with a smooth
background gradient and bright curvilinear structures of widths 2 to 6
pixels (quadratic arcs with random orientation and curvature), plus
additive Gaussian noise.  Ground-truth labels and FOV masks come from the
same construction, so they are exact.
"""

import os

import numpy as np
from scipy.ndimage import distance_transform_edt

from .imgio import write_binary_png, write_gray_png

FOV_RADIUS_FRACTION = 0.46

WIDTH_RANGE = (2.0, 6.0)


def _arc_points(rng, size, radius):
    """Sample a random quadratic arc inside the aperture, ~4 points per pixel."""
    center = (size - 1) / 2.0
    angles = rng.uniform(0.0, 2.0 * np.pi, size=2)
    radii = rng.uniform(0.15, 0.95, size=2) * radius
    p0 = center + radii[0] * np.array([np.cos(angles[0]), np.sin(angles[0])])
    p2 = center + radii[1] * np.array([np.cos(angles[1]), np.sin(angles[1])])
    chord = p2 - p0
    length = np.hypot(*chord)
    if length < 1.0:
        length = 1.0
    normal = np.array([-chord[1], chord[0]]) / length
    bend = rng.uniform(-0.35, 0.35) * length
    p1 = (p0 + p2) / 2.0 + bend * normal
    t = np.linspace(0.0, 1.0, max(int(4 * length), 8))[:, None]
    return (1 - t) ** 2 * p0 + 2 * t * (1 - t) * p1 + t**2 * p2


def synth_image(rng, size):
    """Generate one (image, truth, fov) triple of ``size`` x ``size`` arrays."""
    center = (size - 1) / 2.0
    radius = FOV_RADIUS_FRACTION * size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dist_center = np.hypot(xx - center, yy - center)
    fov = dist_center <= radius

    direction = rng.uniform(0.0, 2.0 * np.pi)
    gradient = ((xx - center) * np.cos(direction) + (yy - center) * np.sin(direction))
    img = 0.52 + 0.12 * gradient / size - 0.06 * (dist_center / radius) ** 2

    truth = np.zeros((size, size), dtype=bool)
    n_arcs = int(rng.integers(6, 10))
    for _ in range(n_arcs):
        width = rng.uniform(*WIDTH_RANGE)
        amp = rng.uniform(0.18, 0.30)
        pts = np.round(_arc_points(rng, size, radius)).astype(int)
        pts = pts[
            (pts[:, 0] >= 0) & (pts[:, 0] < size) & (pts[:, 1] >= 0) & (pts[:, 1] < size)
        ]
        if len(pts) == 0:
            continue
        on = np.zeros((size, size), dtype=bool)
        on[pts[:, 1], pts[:, 0]] = True
        dist = distance_transform_edt(~on)
        truth |= (dist <= width / 2.0) & fov
        img += amp * np.exp(-0.5 * (dist / (0.55 * width)) ** 2)

    img[~fov] = 0.04
    img += rng.normal(0.0, 0.02, size=(size, size))
    return np.clip(img, 0.0, 1.0), truth, fov


def generate_dataset(root, count=8, size=256, seed=0):
    """Write ``count`` image/label/mask triples under a dataset root.

    The generator is fully deterministic: the same seed reproduces the
    dataset bit for bit.

    Returns
    -------
    list of str
        The generated stems, in order.
    """
    rng = np.random.default_rng(seed)
    for sub in ("images", "labels1", "masks"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)
    stems = []
    for i in range(count):
        img, truth, fov = synth_image(rng, size)
        stem = f"synth_{i:02d}"
        write_gray_png(os.path.join(root, "images", stem + ".png"), img)
        write_binary_png(os.path.join(root, "labels1", stem + ".png"), truth)
        write_binary_png(os.path.join(root, "masks", stem + ".png"), fov)
        stems.append(stem)
    return stems

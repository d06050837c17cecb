"""Dataset directory discovery.

A dataset root follows the layout::

    <root>/images/    required, PNG/PPM/PGM rasters
    <root>/masks/     optional FOV masks
    <root>/labels1/   ground-truth vessel labelings
    <root>/labels2/   optional second-observer labelings

Files are paired across directories by shared basename stem.
"""

import os
from dataclasses import dataclass

from .errors import DatasetError
from .imgio import SUPPORTED_EXTENSIONS


@dataclass
class DatasetItem:
    stem: str
    image: str
    mask: str = None
    label1: str = None
    label2: str = None


def _index_dir(path):
    if not os.path.isdir(path):
        return {}
    found = {}
    for name in sorted(os.listdir(path)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in SUPPORTED_EXTENSIONS and stem not in found:
            found[stem] = os.path.join(path, name)
    return found


def discover(root):
    """List dataset items under ``root``, sorted by stem.

    Raises
    ------
    DatasetError
        If ``root`` has no ``images/`` directory or it contains no
        supported raster files.
    """
    images = _index_dir(os.path.join(root, "images"))
    if not images:
        raise DatasetError(
            f"no supported images found under {os.path.join(root, 'images')}"
        )
    masks = _index_dir(os.path.join(root, "masks"))
    labels1 = _index_dir(os.path.join(root, "labels1"))
    labels2 = _index_dir(os.path.join(root, "labels2"))
    return [
        DatasetItem(
            stem=stem,
            image=images[stem],
            mask=masks.get(stem),
            label1=labels1.get(stem),
            label2=labels2.get(stem),
        )
        for stem in sorted(images)
    ]


def require_labels(items, attribute="label1"):
    """Fail with the list of stems missing a label file."""
    missing = [item.stem for item in items if getattr(item, attribute) is None]
    if missing:
        raise DatasetError(
            f"missing {attribute} files for stems: {', '.join(missing)}"
        )

#!/usr/bin/env python3
"""Build the Gaussian-filter benchmark fixtures under data/images/.

Each source picture from scikit-image's bundled data is converted to 8-bit
grayscale, centre-cropped to a square and resized to 512x512. A noisy copy
gets additive Gaussian noise (sigma 10, fixed seed) and is clamped to 0..255.
"""

from pathlib import Path

import numpy as np
from PIL import Image
from skimage import color, data

ROOT = Path(__file__).resolve().parent.parent
NAMES = [
    "camera", "moon", "coins", "page", "text", "brick",
    "grass", "gravel", "astronaut", "chelsea", "coffee", "rocket",
]
SIZE = 512
SIGMA = 10.0
SEED = 42


def load_gray(name):
    img = getattr(data, name)()
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
    if img.dtype != np.uint8:
        img = np.clip(np.round(img * 255.0 if img.max() <= 1.0 else img), 0, 255).astype(np.uint8)
    h, w = img.shape
    side = min(h, w)
    top, left = (h - side) // 2, (w - side) // 2
    img = img[top : top + side, left : left + side]
    return np.asarray(Image.fromarray(img).resize((SIZE, SIZE), Image.LANCZOS))


def main():
    out = ROOT / "data" / "images"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    for k, name in enumerate(NAMES):
        clean = load_gray(name)
        noisy = np.clip(np.round(clean + rng.normal(0.0, SIGMA, clean.shape)), 0, 255).astype(np.uint8)
        Image.fromarray(clean).save(out / f"{k:02d}_{name}_clean.pgm")
        Image.fromarray(noisy).save(out / f"{k:02d}_{name}_noisy.pgm")
    print(f"wrote {2 * len(NAMES)} images to {out}")


if __name__ == "__main__":
    main()

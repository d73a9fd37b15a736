"""The 12-image bird/cat/dog silhouette set, its 15-slot targets, and image file I/O."""

import csv
import gzip
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sann.errors import InputError
from sann.network import N_CLASSES, N_INDIVIDUALS, N_OUTPUTS
from sann.numerics import Rng

SIZE = 28
CLASS_NAMES = ("bird", "cat", "dog")
PER_CLASS = 4


@dataclass
class LabeledImage:
    pixels: np.ndarray  # (28, 28) floats in [0, 1]
    class_index: int
    individual_index: Optional[int]
    id: str

    @property
    def vector(self):
        return self.pixels.reshape(-1)

    @property
    def target(self):
        return encode_labels(self.class_index, self.individual_index)


def encode_labels(class_index, individual_index):
    """Two-hot target: class one-hot in slots 0..2, individual k at slot 3 + k."""
    if not (isinstance(class_index, (int, np.integer)) and 0 <= class_index < N_CLASSES):
        raise InputError(f"class index must be in 0..{N_CLASSES - 1}, got {class_index!r}")
    if not (isinstance(individual_index, (int, np.integer)) and 0 <= individual_index < N_INDIVIDUALS):
        raise InputError(f"individual index must be in 0..{N_INDIVIDUALS - 1}, got {individual_index!r}")
    t = np.zeros(N_OUTPUTS)
    t[class_index] = 1.0
    t[N_CLASSES + individual_index] = 1.0
    return t


# -- procedural silhouettes ---------------------------------------------------
#
# Shapes are described in a unit frame (x right, y down, both in [-1, 1]) and
# rasterized by testing pixel centres, after undoing a per-image scale, shift
# and optional horizontal flip.


def _ellipse(x, y, cx, cy, rx, ry, angle=0.0):
    c, s = np.cos(angle), np.sin(angle)
    u = (x - cx) * c + (y - cy) * s
    v = -(x - cx) * s + (y - cy) * c
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def _polygon(x, y, pts):
    """Convex polygon, vertices in either winding order."""
    pts = np.asarray(pts, dtype=float)
    signs = []
    for (x0, y0), (x1, y1) in zip(pts, np.roll(pts, -1, axis=0)):
        signs.append((x1 - x0) * (y - y0) - (y1 - y0) * (x - x0))
    signs = np.array(signs)
    return np.all(signs >= 0, axis=0) | np.all(signs <= 0, axis=0)


def _segment(x, y, p0, p1, width):
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    d = p1 - p0
    t = np.clip(((x - p0[0]) * d[0] + (y - p0[1]) * d[1]) / (d @ d), 0.0, 1.0)
    return np.hypot(x - (p0[0] + t * d[0]), y - (p0[1] + t * d[1])) <= width / 2


def _bird(x, y, pose, r):
    body = _ellipse(x, y, 0.0, 0.1, 0.5, 0.26, -0.15)
    head = _ellipse(x, y, 0.5, -0.22, 0.2, 0.19)
    beak = _polygon(x, y, [(0.66, -0.28), (0.66, -0.14), (0.92 + 0.06 * r[0], -0.2)])
    tail = _polygon(x, y, [(-0.4, 0.05), (-0.4, 0.25), (-0.85, 0.0 + 0.25 * pose[1])])
    if pose[0]:  # wings raised
        wing = _polygon(x, y, [(-0.2, 0.0), (0.25, 0.0), (-0.25 + 0.1 * r[1], -0.8)])
    else:
        wing = _polygon(x, y, [(-0.25, 0.05), (0.2, 0.05), (-0.45, 0.45 + 0.1 * r[1])])
    legs = _segment(x, y, (0.0, 0.3), (-0.05, 0.7), 0.09) | _segment(x, y, (0.15, 0.3), (0.15, 0.7), 0.09)
    return body | head | beak | tail | wing | legs


def _cat(x, y, pose, r):
    body = _ellipse(x, y, 0.0, 0.35, 0.38, 0.5)
    head = _ellipse(x, y, 0.05, -0.38, 0.3, 0.27)
    ear_l = _polygon(x, y, [(-0.22, -0.5), (-0.02, -0.58), (-0.2 - 0.05 * r[0], -0.88)])
    ear_r = _polygon(x, y, [(0.12, -0.58), (0.32, -0.5), (0.3 + 0.05 * r[0], -0.88)])
    if pose[0]:  # tail curled up along the back
        tail = _segment(x, y, (-0.3, 0.7), (-0.7, 0.55), 0.12) | _segment(x, y, (-0.7, 0.55), (-0.72, 0.0 + 0.15 * r[1]), 0.12)
    else:  # tail lying flat
        tail = _segment(x, y, (0.2, 0.8), (0.8, 0.82 - 0.1 * r[1]), 0.12)
    paws = _ellipse(x, y, -0.1, 0.86, 0.14, 0.07) | _ellipse(x, y, 0.15, 0.86, 0.14, 0.07)
    if pose[1]:  # raised paw
        paws = paws | _segment(x, y, (0.25, 0.2), (0.5, -0.05), 0.13)
    return body | head | ear_l | ear_r | tail | paws


def _dog(x, y, pose, r):
    body = _ellipse(x, y, -0.05, 0.05, 0.55, 0.25)
    head = _ellipse(x, y, 0.55, -0.3, 0.2, 0.19)
    snout = _polygon(x, y, [(0.6, -0.33), (0.92 + 0.05 * r[0], -0.3), (0.92 + 0.05 * r[0], -0.17), (0.6, -0.15)])
    ear = _ellipse(x, y, 0.45, -0.22, 0.07, 0.16, 0.4)
    legs = (
        _segment(x, y, (-0.45, 0.15), (-0.5, 0.82), 0.14)
        | _segment(x, y, (-0.25, 0.15), (-0.22, 0.82), 0.14)
        | _segment(x, y, (0.25, 0.15), (0.28, 0.82), 0.14)
        | _segment(x, y, (0.42, 0.15), (0.5 + 0.15 * pose[1], 0.82), 0.14)
    )
    if pose[0]:  # tail up
        tail = _segment(x, y, (-0.55, -0.05), (-0.8, -0.5 - 0.1 * r[1]), 0.1)
    else:
        tail = _segment(x, y, (-0.55, 0.05), (-0.9, 0.3 + 0.1 * r[1]), 0.1)
    return body | head | snout | ear | legs | tail


_DRAW = (_bird, _cat, _dog)
# (pose flag 0, pose flag 1, flip) per variant; makes the four individuals of a class differ by construction
_POSES = ((0, 0, False), (1, 0, False), (0, 1, True), (1, 1, True))


def render_silhouette(class_index, variant, rng):
    pose0, pose1, flip = _POSES[variant]
    jitter = rng.uniform(-1.0, 1.0, size=5)
    scale = 0.88 + 0.06 * jitter[0] + 0.03 * variant
    shift = 0.06 * jitter[1:3]
    c = (np.arange(SIZE) + 0.5) / SIZE * 2.0 - 1.0
    gx, gy = np.meshgrid(c, c)
    x = (gx - shift[0]) / scale
    y = (gy - shift[1]) / scale
    if flip:
        x = -x
    mask = _DRAW[class_index](x, y, (pose0, pose1), jitter[3:5])
    return mask.astype(np.float64)


def generate_silhouettes(seed=0):
    """12 binary 28x28 images, four per class, in class-major order (individual k of class c is 4c + k)."""
    rng = Rng(seed)
    images = []
    for c, name in enumerate(CLASS_NAMES):
        for k in range(PER_CLASS):
            pixels = render_silhouette(c, k, rng)
            images.append(LabeledImage(pixels, c, c * PER_CLASS + k, f"{name}{k}"))
    return images


def training_pairs(images, codes=None):
    """``(input, target)`` pairs; inputs are the codes when given, else flattened pixels."""
    if codes is None:
        codes = [im.vector for im in images]
    return [(np.asarray(code, dtype=np.float64), im.target) for code, im in zip(codes, images)]


def find_image(images, image_id):
    for im in images:
        if im.id == image_id:
            return im
    known = ", ".join(im.id for im in images)
    raise InputError(f"no image with id {image_id!r} (known: {known})")


# -- PGM ---------------------------------------------------------------------


def _pgm_tokens(data):
    """Yield (token, end offset) for the header fields, skipping comments."""
    pos = 0
    n = len(data)
    while True:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise InputError("PGM header truncated")
        yield data[start:pos], pos


def parse_pgm(data, shape=(SIZE, SIZE)):
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        if magic != b"P5":
            raise InputError(f"not a binary PGM (magic {magic!r}, expected b'P5')")
        width, _ = next(tokens)
        height, _ = next(tokens)
        maxval, end = next(tokens)
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError as e:
        raise InputError(f"malformed PGM header: {e}") from None
    if not 0 < maxval <= 255:
        raise InputError(f"PGM maxval must be in 1..255, got {maxval}")
    if shape is not None and (height, width) != tuple(shape):
        raise InputError(f"PGM is {width}x{height}, expected {shape[1]}x{shape[0]}")
    payload = data[end + 1 :]
    if len(payload) < width * height:
        raise InputError(f"PGM payload truncated: {len(payload)} of {width * height} bytes")
    raw = np.frombuffer(payload, dtype=np.uint8, count=width * height)
    if raw.max(initial=0) > maxval:
        raise InputError("PGM sample exceeds maxval")
    return raw.reshape(height, width).astype(np.float64) / maxval


def load_pgm(path, shape=(SIZE, SIZE)):
    """Pixels of a binary (P5) PGM scaled to [0, 1]; rejects sizes other than ``shape``."""
    with open(path, "rb") as f:
        return parse_pgm(f.read(), shape)


def write_pgm(path, pixels):
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2:
        raise InputError(f"need a 2-D image, got shape {pixels.shape}")
    q = np.rint(np.clip(pixels, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = q.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(q.tobytes())


# -- IDX (MNIST) ---------------------------------------------------------------

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


def _open(path):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def load_idx(images_path, labels_path, limit=None):
    """Up to ``limit`` images with their raw integer labels (stored in ``class_index``)."""
    with _open(images_path) as f:
        img_data = f.read()
    with _open(labels_path) as f:
        lbl_data = f.read()
    if len(img_data) < 16 or len(lbl_data) < 8:
        raise InputError("IDX header truncated")
    magic, count, rows, cols = struct.unpack_from(">IIII", img_data)
    if magic != IDX_IMAGES:
        raise InputError(f"bad IDX image magic 0x{magic:08x}, expected 0x{IDX_IMAGES:08x}")
    lmagic, lcount = struct.unpack_from(">II", lbl_data)
    if lmagic != IDX_LABELS:
        raise InputError(f"bad IDX label magic 0x{lmagic:08x}, expected 0x{IDX_LABELS:08x}")
    if count != lcount:
        raise InputError(f"IDX files disagree: {count} images, {lcount} labels")
    if len(img_data) - 16 < count * rows * cols or len(lbl_data) - 8 < count:
        raise InputError("IDX payload shorter than its header claims")
    n = count if limit is None else max(0, min(int(limit), count))
    pixels = np.frombuffer(img_data, dtype=np.uint8, count=n * rows * cols, offset=16)
    pixels = pixels.reshape(n, rows, cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lbl_data, dtype=np.uint8, count=n, offset=8)
    return [LabeledImage(pixels[k], int(labels[k]), None, f"idx{k}") for k in range(n)]


def write_idx(images_path, labels_path, pixels, labels):
    """Write uint8 IDX files; ``pixels`` is (n, rows, cols) in [0, 1]."""
    pixels = np.asarray(pixels, dtype=np.float64)
    n, rows, cols = pixels.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES, n, rows, cols))
        f.write(np.rint(np.clip(pixels, 0, 1) * 255).astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS, n))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


# -- manifest -------------------------------------------------------------------

MANIFEST_HEADER = ["id", "class", "individual", "path"]


def write_dataset(images, out_dir):
    """Write each image as ``<id>.pgm`` plus ``manifest.csv``; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = os.path.join(out_dir, "manifest.csv")
    with open(manifest, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for im in images:
            name = f"{im.id}.pgm"
            write_pgm(os.path.join(out_dir, name), im.pixels)
            w.writerow([im.id, im.class_index, im.individual_index, name])
    return manifest


def read_manifest(path):
    """Load images listed in a manifest; relative paths resolve against the manifest's folder."""
    base = os.path.dirname(os.path.abspath(path))
    images = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != MANIFEST_HEADER:
            raise InputError(f"manifest header must be {MANIFEST_HEADER}, got {reader.fieldnames}")
        for row in reader:
            try:
                c, k = int(row["class"]), int(row["individual"])
            except ValueError:
                raise InputError(f"bad class/individual in manifest row {row}") from None
            encode_labels(c, k)
            pixels = load_pgm(os.path.join(base, row["path"]))
            images.append(LabeledImage(pixels, c, k, row["id"]))
    if not images:
        raise InputError(f"manifest {path} lists no images")
    return images

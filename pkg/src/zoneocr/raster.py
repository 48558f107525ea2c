"""Grayscale/binary rasters, PGM (P2/P5) I/O and dataset-directory loading."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class PgmError(ValueError):
    """Base class for PGM parse failures; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PgmMagicError(PgmError):
    pass


class PgmHeaderError(PgmError):
    pass


class PgmMaxvalError(PgmError):
    pass


class PgmTruncatedError(PgmError):
    pass


class PgmValueError(PgmError):
    pass


class DatasetError(Exception):
    """Fatal problem with a dataset tree; the message names the offending path."""


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image, 0 = black ink, 255 = white paper.

    ``pixels`` is a (height, width) uint8 array; row-major, top row first.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("GrayImage intensities must lie in 0..255")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_list(cls, width: int, height: int, pixels) -> GrayImage:
        flat = np.asarray(pixels)
        if flat.size != width * height:
            raise ValueError(f"expected {width * height} pixels, got {flat.size}")
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"GrayImage(width={self.width}, height={self.height})"


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Boolean raster, True = foreground ink. ``mask`` has shape (height, width)."""

    mask: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.mask, dtype=bool))
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"BinaryImage needs a non-empty 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "mask", arr)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    def foreground_count(self) -> int:
        return int(self.mask.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    def __repr__(self):
        return f"BinaryImage(width={self.width}, height={self.height}, ink={self.foreground_count()})"


# ---------------------------------------------------------------- PGM


_WHITESPACE = b" \t\r\n\x0b\x0c"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return (token, token_start, position after token), skipping whitespace and comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in _WHITESPACE:
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], start, pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int, int]:
    tok, start, pos = _next_token(data, pos)
    if not tok:
        raise PgmHeaderError(f"missing {what}", start)
    if not tok.isdigit():
        raise PgmHeaderError(f"{what} is not a decimal integer: {tok[:16]!r}", start)
    return int(tok), start, pos


def _rescale(values: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return values.astype(np.uint8)
    v = values.astype(np.int64)
    # round half-up of v * 255 / maxval
    return ((2 * 255 * v + maxval) // (2 * maxval)).astype(np.uint8)


def read_pgm(data: bytes) -> GrayImage:
    """Parse a binary (P5) or ASCII (P2) PGM with maxval <= 255."""
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise PgmMagicError(f"unknown magic {magic!r}", 0)
    pos = 2
    if pos < len(data) and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        raise PgmMagicError(f"unknown magic {data[:3]!r}", 0)

    width, start, pos = _header_int(data, pos, "width")
    if width < 1:
        raise PgmHeaderError("width must be >= 1", start)
    height, start, pos = _header_int(data, pos, "height")
    if height < 1:
        raise PgmHeaderError("height must be >= 1", start)
    maxval, start, pos = _header_int(data, pos, "maxval")
    if maxval < 1:
        raise PgmHeaderError("maxval must be >= 1", start)
    if maxval > 255:
        raise PgmMaxvalError(f"maxval {maxval} > 255 is not supported", start)

    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(data):
            raise PgmTruncatedError(f"payload missing, expected {count} bytes", pos)
        pos += 1
        payload = data[pos : pos + count]
        if len(payload) < count:
            raise PgmTruncatedError(
                f"payload has {len(payload)} bytes, expected {count}", pos + len(payload)
            )
        values = np.frombuffer(payload, dtype=np.uint8)
        bad = np.flatnonzero(values > maxval)
        if bad.size:
            raise PgmValueError(f"sample exceeds maxval {maxval}", pos + int(bad[0]))
    else:
        values = np.empty(count, dtype=np.int64)
        for i in range(count):
            tok, start, pos = _next_token(data, pos)
            if not tok:
                raise PgmTruncatedError(f"payload has {i} samples, expected {count}", start)
            if not tok.isdigit():
                raise PgmValueError(f"sample is not a decimal integer: {tok[:16]!r}", start)
            v = int(tok)
            if v > maxval:
                raise PgmValueError(f"sample {v} exceeds maxval {maxval}", start)
            values[i] = v
    return GrayImage(_rescale(values, maxval).reshape(height, width))


def write_pgm(img: GrayImage) -> bytes:
    """Canonical P5 encoding: ``P5\\n<w> <h>\\n255\\n`` followed by the raw bytes."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def write_pgm_ascii(img: GrayImage) -> bytes:
    rows = [" ".join(str(int(v)) for v in row) for row in img.pixels]
    return (f"P2\n{img.width} {img.height}\n255\n" + "\n".join(rows) + "\n").encode("ascii")


def read_pgm_file(path: str | Path) -> GrayImage:
    return read_pgm(Path(path).read_bytes())


def write_pgm_file(path: str | Path, img: GrayImage) -> None:
    Path(path).write_bytes(write_pgm(img))


# ---------------------------------------------------------------- datasets


@dataclass(frozen=True)
class Sample:
    class_id: int
    sample_id: str
    image: GrayImage


@dataclass
class RawDataset:
    classes: list[tuple[int, str]]
    samples: list[Sample] = field(default_factory=list)

    def __post_init__(self):
        known = {cid for cid, _ in self.classes}
        seen = set()
        for s in self.samples:
            if s.class_id not in known:
                raise ValueError(f"sample {s.sample_id!r} has unknown class {s.class_id}")
            key = (s.class_id, s.sample_id)
            if key in seen:
                raise ValueError(f"duplicate sample {key}")
            seen.add(key)

    def __len__(self):
        return len(self.samples)

    def counts(self) -> dict[int, int]:
        out = {cid: 0 for cid, _ in self.classes}
        for s in self.samples:
            out[s.class_id] += 1
        return out


CLASSES_FILE = "classes.tsv"


def read_classes_tsv(path: Path) -> list[tuple[int, str]]:
    classes = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip().isdigit():
            raise DatasetError(f"{path}:{lineno}: expected '<class_id>\\t<class_name>'")
        classes.append((int(parts[0]), parts[1]))
    classes.sort()
    ids = [cid for cid, _ in classes]
    if ids != list(range(len(ids))):
        raise DatasetError(f"{path}: class ids must be contiguous 0..N-1, got {ids}")
    return classes


def write_classes_tsv(path: Path, classes: list[tuple[int, str]]) -> None:
    path.write_text("".join(f"{cid}\t{name}\n" for cid, name in classes), encoding="utf-8")


def load_dataset(root: str | Path) -> RawDataset:
    """Load ``root/classes.tsv`` plus ``root/class_<id>/*.pgm``.

    Samples come out ordered by class id, then by file name.
    """
    root = Path(root)
    tsv = root / CLASSES_FILE
    if not tsv.is_file():
        raise DatasetError(f"missing {tsv}")
    classes = read_classes_tsv(tsv)
    known = {cid for cid, _ in classes}

    for entry in sorted(root.iterdir()):
        if entry.is_dir() and entry.name.startswith("class_"):
            suffix = entry.name[len("class_"):]
            if not suffix.isdigit() or int(suffix) not in known:
                raise DatasetError(f"directory for unlisted class: {entry}")

    samples = []
    for cid, _ in classes:
        cdir = root / f"class_{cid}"
        if not cdir.is_dir():
            continue
        for f in sorted(cdir.glob("*.pgm"), key=lambda p: p.name):
            try:
                img = read_pgm_file(f)
            except (OSError, PgmError) as exc:
                raise DatasetError(f"cannot read {f}: {exc}") from exc
            samples.append(Sample(cid, f.stem, img))
    return RawDataset(classes, samples)

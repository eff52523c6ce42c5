"""Reader and writer for the IDX format (MNIST-style, unsigned bytes, big-endian header)."""
import gzip
import struct

import numpy as np

from .errors import FormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _open(path, mode):
    return gzip.open(path, mode) if str(path).endswith(".gz") else open(path, mode)


def parse_idx(buf, expected_magic=None):
    """Parse raw IDX bytes of unsigned-byte data into an array of the declared shape."""
    if len(buf) < 4:
        raise FormatError("file too short for an IDX magic number", offset=len(buf))
    magic = struct.unpack(">I", buf[:4])[0]
    if expected_magic is not None and magic != expected_magic:
        raise FormatError(f"bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}", offset=0)
    if magic >> 8 != 0x08:
        raise FormatError(f"unsupported IDX data type in magic 0x{magic:08x}", offset=2)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if ndim < 1 or len(buf) < header:
        raise FormatError(f"truncated IDX header (need {header} bytes)", offset=len(buf))
    shape = struct.unpack(f">{ndim}I", buf[4:header])
    size = int(np.prod(shape, dtype=np.int64))
    if len(buf) < header + size:
        raise FormatError(f"truncated IDX payload: declared {size} bytes, found {len(buf) - header}",
                          offset=len(buf))
    return np.frombuffer(buf, dtype=np.uint8, count=size, offset=header).reshape(shape)


def read_idx(path, expected_magic=None):
    with _open(path, "rb") as fh:
        return parse_idx(fh.read(), expected_magic)


def write_idx(path, array):
    """Write a uint8 array as IDX (magic 0x0803 for 3-D, 0x0801 for 1-D, etc.)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    with _open(path, "wb") as fh:
        fh.write(header + array.tobytes())


def load_idx(images_path, labels_path=None, limit=None):
    """Images as an N x (rows * cols) float matrix in [0, 1], plus labels if a path is given."""
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = None if labels_path is None else read_idx(labels_path, LABELS_MAGIC)
    if labels is not None and len(labels) != len(images):
        raise FormatError(f"{len(labels)} labels for {len(images)} images")
    if limit is not None:
        images = images[:limit]
        labels = None if labels is None else labels[:limit]
    x = images.reshape(len(images), -1).astype(float) / 255.0
    return x, (None if labels is None else labels.astype(np.int64))

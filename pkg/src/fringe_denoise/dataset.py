"""Clean/noisy patch datasets with full provenance.

Patches are cut on a regular grid (offsets 0, stride, 2*stride, ... up to
the largest fit) from a corpus of aligned clean/noisy image pairs.  Every
patch is identified by (source index, row offset, column offset,
augmentation code), so its pixels can be re-materialized from the corpus
at any time; nothing about patch content is stored in the in-memory
dataset.

The packed on-disk form is a JSON-headed binary whose payload is the
concatenation of float-image blobs, two per pair, enabling random access
by index (all blobs have equal size) and memory-mapped streaming of large
datasets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image_io import FPD1_HEADER_BYTES, decode_fpd1, encode_fpd1

AUG_NONE = 0
AUG_HFLIP = 1
AUG_ROT90 = 2
AUG_ROT180 = 3
AUG_ROT270 = 4

AUG_NAMES = {
    AUG_NONE: "none",
    AUG_HFLIP: "hflip",
    AUG_ROT90: "rot90",
    AUG_ROT180: "rot180",
    AUG_ROT270: "rot270",
}
AUG_CODES = {name: code for code, name in AUG_NAMES.items()}

EXPAND = "expand"
IN_PLACE = "in_place"


class DatasetError(ValueError):
    pass


def apply_augmentation(patch: np.ndarray, code: int) -> np.ndarray:
    if code == AUG_NONE:
        return patch
    if code == AUG_HFLIP:
        return patch[:, ::-1]
    if code == AUG_ROT90:
        return np.rot90(patch, 1)
    if code == AUG_ROT180:
        return np.rot90(patch, 2)
    if code == AUG_ROT270:
        return np.rot90(patch, 3)
    raise DatasetError(f"unknown augmentation code {code}")


@dataclass(frozen=True)
class PatchRef:
    source: int
    row: int
    col: int
    aug: int = AUG_NONE


def grid_offsets(dim: int, patch_size: int, stride: int) -> range:
    """Regular-grid offsets 0, stride, ... not exceeding dim - patch_size."""
    return range(0, dim - patch_size + 1, stride)


class PatchDataset:
    """Lazy view over a corpus: provenance records plus a patch extractor."""

    def __init__(
        self,
        corpus,
        provenance: list[PatchRef],
        patch_size: int,
        stride: int,
    ) -> None:
        self.corpus = corpus
        self.provenance = provenance
        self.patch_size = patch_size
        self.stride = stride

    def __len__(self) -> int:
        return len(self.provenance)

    def __getitem__(self, idx: int) -> tuple[np.ndarray, np.ndarray]:
        ref = self.provenance[idx]
        clean, noisy = self.corpus[ref.source]
        p = self.patch_size
        window = (slice(ref.row, ref.row + p), slice(ref.col, ref.col + p))
        return (
            np.ascontiguousarray(apply_augmentation(clean[window], ref.aug)),
            np.ascontiguousarray(apply_augmentation(noisy[window], ref.aug)),
        )


def build_dataset(
    corpus,
    patch_size: int = 80,
    stride: int = 16,
    augmentations: tuple[int, ...] = (),
    mode: str = EXPAND,
) -> PatchDataset:
    """Cut every corpus pair into grid patches, optionally augmented.

    ``mode="expand"`` emits one extra copy of every patch per selected
    augmentation; ``mode="in_place"`` keeps the base patch count and
    assigns augmentations round-robin over the grid (deterministic, no
    randomness involved).
    """
    if mode not in (EXPAND, IN_PLACE):
        raise DatasetError(f"unknown augmentation mode {mode!r}")
    augs = list(dict.fromkeys(augmentations))
    if AUG_NONE in augs:
        raise DatasetError("augmentations are extras; the identity is implicit")
    provenance: list[PatchRef] = []
    variants = [AUG_NONE] + augs
    for src, (clean, noisy) in enumerate(corpus):
        if clean.shape != noisy.shape:
            raise DatasetError(
                f"corpus pair {src} has mismatched shapes {clean.shape} vs {noisy.shape}"
            )
        h, w = clean.shape
        if h < patch_size or w < patch_size:
            raise DatasetError(
                f"corpus image {src} ({h}x{w}) is smaller than the "
                f"{patch_size}x{patch_size} patch"
            )
        base = [
            (r, c)
            for r in grid_offsets(h, patch_size, stride)
            for c in grid_offsets(w, patch_size, stride)
        ]
        if mode == EXPAND:
            for aug in variants:
                provenance.extend(PatchRef(src, r, c, aug) for r, c in base)
        else:
            for k, (r, c) in enumerate(base):
                provenance.append(PatchRef(src, r, c, variants[k % len(variants)]))
    return PatchDataset(corpus, provenance, patch_size, stride)


# --- packed on-disk form ----------------------------------------------------

PACKED_MAGIC = b"FPDS"
PACKED_VERSION = 1


def write_packed(path, dataset) -> None:
    """Serialize any (len, getitem, provenance) dataset to the packed form."""
    p = dataset.patch_size
    header = {
        "version": PACKED_VERSION,
        "patch_size": p,
        "stride": dataset.stride,
        "count": len(dataset),
        "provenance": [
            [ref.source, ref.row, ref.col, ref.aug] for ref in dataset.provenance
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("ascii")
    with open(path, "wb") as fh:
        fh.write(PACKED_MAGIC)
        fh.write(np.uint32(PACKED_VERSION).tobytes())
        fh.write(np.uint32(len(blob)).tobytes())
        fh.write(blob)
        for i in range(len(dataset)):
            clean, noisy = dataset[i]
            fh.write(encode_fpd1(clean))
            fh.write(encode_fpd1(noisy))


class PackedDataset:
    """Random access into a packed dataset file via a memory map."""

    def __init__(self, path) -> None:
        self.path = Path(path)
        raw = np.memmap(self.path, dtype=np.uint8, mode="r")
        if bytes(raw[:4]) != PACKED_MAGIC:
            raise DatasetError(f"{path}: not a packed dataset (bad magic)")
        version = int(np.frombuffer(raw[4:8], dtype="<u4")[0])
        if version != PACKED_VERSION:
            raise DatasetError(f"{path}: unsupported packed version {version}")
        hlen = int(np.frombuffer(raw[8:12], dtype="<u4")[0])
        header = json.loads(bytes(raw[12 : 12 + hlen]).decode("ascii"))
        self.patch_size = header["patch_size"]
        self.stride = header["stride"]
        self.provenance = [PatchRef(*entry) for entry in header["provenance"]]
        self._count = header["count"]
        self._payload_start = 12 + hlen
        self._blob_bytes = FPD1_HEADER_BYTES + 4 * self.patch_size * self.patch_size
        expected = self._payload_start + self._count * 2 * self._blob_bytes
        if raw.size < expected:
            raise DatasetError(
                f"{path}: truncated payload ({raw.size} bytes, expected {expected})"
            )
        self._raw = raw

    def __len__(self) -> int:
        return self._count

    def __getitem__(self, idx: int) -> tuple[np.ndarray, np.ndarray]:
        if not 0 <= idx < self._count:
            raise IndexError(idx)
        off = self._payload_start + idx * 2 * self._blob_bytes
        clean = decode_fpd1(bytes(self._raw[off : off + self._blob_bytes]))
        off += self._blob_bytes
        noisy = decode_fpd1(bytes(self._raw[off : off + self._blob_bytes]))
        return clean, noisy

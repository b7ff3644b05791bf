"""Pure-numpy RNVF codec for tools that produce features outside the engine."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

MAGIC = b"RNVF"
VERSION = 1
_HEADER = struct.Struct("<4sIfIIB")

SILENCE = 1
VOICED = 2


@dataclass
class Features:
    frame_rate: float
    frames: np.ndarray  # (n_frames, dim) float32
    flags: Optional[np.ndarray] = None  # (n_frames,) uint8

    def __post_init__(self) -> None:
        self.frames = np.ascontiguousarray(self.frames, dtype="<f4")
        if self.frames.ndim != 2 or self.frames.shape[1] < 1:
            raise ValueError("frames must be a (n_frames, dim) array with dim >= 1")
        if not (self.frame_rate > 0):
            raise ValueError("frame_rate must be positive")
        if self.flags is not None:
            self.flags = np.ascontiguousarray(self.flags, dtype=np.uint8)
            if self.flags.shape != (self.frames.shape[0],):
                raise ValueError("flags must hold one byte per frame")
            if np.any((self.flags & SILENCE) & ((self.flags & VOICED) >> 1)):
                raise ValueError("a frame cannot be both silent and voiced")


def encode(f: Features) -> bytes:
    n, dim = f.frames.shape
    head = _HEADER.pack(MAGIC, VERSION, f.frame_rate, dim, n, 1 if f.flags is not None else 0)
    body = f.frames.tobytes()
    tail = f.flags.tobytes() if f.flags is not None else b""
    return head + body + tail


def decode(data: bytes) -> Features:
    if len(data) < _HEADER.size:
        raise ValueError("RNVF: truncated header")
    magic, version, frame_rate, dim, n, has_flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("RNVF: bad magic")
    if version != VERSION:
        raise ValueError(f"RNVF: unsupported version {version}")
    need = _HEADER.size + 4 * n * dim + (n if has_flags else 0)
    if len(data) < need:
        raise ValueError("RNVF: truncated payload")
    frames = np.frombuffer(data, dtype="<f4", count=n * dim, offset=_HEADER.size).reshape(n, dim)
    flags = None
    if has_flags:
        flags = np.frombuffer(data, dtype=np.uint8, count=n, offset=_HEADER.size + 4 * n * dim)
    return Features(float(frame_rate), frames.copy(), None if flags is None else flags.copy())


def write(path: str | os.PathLike, f: Features) -> None:
    tmp = f"{os.fspath(path)}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(encode(f))
    os.replace(tmp, path)


def read(path: str | os.PathLike) -> Features:
    with open(path, "rb") as fh:
        return decode(fh.read())

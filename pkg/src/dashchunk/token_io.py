"""Token dump container (DSH1), attention logits, and synthetic streams.

A DSH1 file is a fixed 20-byte header followed by ``N * D`` little-endian
float32 values in row-major order::

    0-3    magic b"DSH1"
    4      version (1)
    5      dtype (0 = float32)
    6-7    reserved, zero
    8-11   N, uint32 LE
    12-15  D, uint32 LE
    16-19  reserved, zero

Attention logits and retention masks use the same container with ``D = 1``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "MAGIC",
    "HEADER_SIZE",
    "DumpFormatError",
    "BadMagicError",
    "UnsupportedFormatError",
    "TruncatedPayloadError",
    "NonFiniteValueError",
    "FrameGrid",
    "SyntheticSpec",
    "as_token_matrix",
    "as_attention_logits",
    "encode_token_dump",
    "decode_token_dump",
    "read_token_dump",
    "write_token_dump",
    "read_attention_logits",
    "write_attention_logits",
    "generate_piecewise",
]

MAGIC = b"DSH1"
VERSION = 1
DTYPE_F32 = 0
HEADER_SIZE = 20
_HEADER = struct.Struct("<4sBBHIII")


class DumpFormatError(ValueError):
    """Base class for malformed DSH1 containers."""


class BadMagicError(DumpFormatError):
    pass


class UnsupportedFormatError(DumpFormatError):
    """Unknown version, dtype, or nonzero reserved bytes."""


class TruncatedPayloadError(DumpFormatError):
    """Payload length disagrees with the header shape."""


class NonFiniteValueError(DumpFormatError):
    pass


def as_token_matrix(data, name: str = "tokens") -> np.ndarray:
    """Validate and return ``data`` as a 2-D float array with N, D >= 1."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name}: empty matrix of shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    # A finite sum proves every entry finite; otherwise look closer (the sum
    # of large finite values can overflow).
    with np.errstate(over="ignore", invalid="ignore"):
        total = arr.sum()
    if not np.isfinite(total) and not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise ValueError(f"{name}: non-finite value in row {bad}")
    return arr


def as_attention_logits(values, n: int | None = None) -> np.ndarray:
    """Flatten logits to 1-D, checking finiteness and optionally the length."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"attention logits must be a vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(
            f"attention logits length {arr.shape[0]} does not match {n} audio tokens"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("attention logits contain non-finite values")
    return arr


@dataclass(frozen=True)
class FrameGrid:
    """Video tokens laid out as ``frames`` x ``tokens_per_frame`` rows."""

    tokens: np.ndarray
    frames: int
    tokens_per_frame: int

    def __post_init__(self):
        tokens = as_token_matrix(self.tokens, "video")
        if self.frames < 1 or self.tokens_per_frame < 1:
            raise ValueError("frames and tokens_per_frame must be >= 1")
        if tokens.shape[0] != self.frames * self.tokens_per_frame:
            raise ValueError(
                f"video has {tokens.shape[0]} tokens, expected "
                f"{self.frames} x {self.tokens_per_frame}"
            )
        object.__setattr__(self, "tokens", tokens)

    @classmethod
    def from_tokens(cls, tokens, tokens_per_frame: int) -> "FrameGrid":
        n = np.asarray(tokens).shape[0]
        if tokens_per_frame < 1 or n % tokens_per_frame:
            raise ValueError(
                f"{n} video tokens are not divisible into frames of {tokens_per_frame}"
            )
        return cls(tokens, n // tokens_per_frame, tokens_per_frame)

    @property
    def n_tokens(self) -> int:
        return self.frames * self.tokens_per_frame

    def frame(self, f: int) -> np.ndarray:
        k = self.tokens_per_frame
        return self.tokens[f * k : (f + 1) * k]

    def cube(self) -> np.ndarray:
        """View as an ``(F, K, D)`` array."""
        return self.tokens.reshape(self.frames, self.tokens_per_frame, -1)


# -- DSH1 container ---------------------------------------------------------


def encode_token_dump(matrix) -> bytes:
    arr = as_token_matrix(matrix)
    n, d = arr.shape
    if n > 0xFFFFFFFF or d > 0xFFFFFFFF:
        raise ValueError("matrix too large for a DSH1 header")
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, n, d, 0)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_token_dump(buf: bytes) -> np.ndarray:
    """Decode DSH1 bytes into an ``(N, D)`` float32 array."""
    if len(buf) < HEADER_SIZE:
        if len(buf) >= 4 and buf[:4] != MAGIC:
            raise BadMagicError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
        raise TruncatedPayloadError(
            f"file is {len(buf)} bytes, shorter than the {HEADER_SIZE}-byte header"
        )
    magic, version, dtype, reserved_a, n, d, reserved_b = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedFormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise UnsupportedFormatError(f"unsupported dtype code {dtype}")
    if reserved_a or reserved_b:
        raise UnsupportedFormatError("reserved header bytes must be zero")
    if n < 1 or d < 1:
        raise UnsupportedFormatError(f"invalid shape N={n}, D={d}")
    expected = HEADER_SIZE + 4 * n * d
    if len(buf) != expected:
        raise TruncatedPayloadError(
            f"payload is {len(buf) - HEADER_SIZE} bytes, header declares {4 * n * d}"
        )
    arr = np.frombuffer(buf, dtype="<f4", offset=HEADER_SIZE).reshape(n, d)
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise NonFiniteValueError(f"non-finite value in row {bad}")
    return arr.astype(np.float32)


def read_token_dump(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_token_dump(fh.read())


def write_token_dump(matrix, path: str | os.PathLike) -> None:
    data = encode_token_dump(matrix)
    with open(path, "wb") as fh:
        fh.write(data)


def read_attention_logits(path: str | os.PathLike, n: int | None = None) -> np.ndarray:
    arr = read_token_dump(path)
    if arr.shape[1] != 1:
        raise UnsupportedFormatError(
            f"attention logits must have D=1, file has D={arr.shape[1]}"
        )
    return as_attention_logits(arr[:, 0], n)


def write_attention_logits(values, path: str | os.PathLike) -> None:
    write_token_dump(as_attention_logits(values)[:, None], path)


# -- synthetic streams ------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a piecewise-coherent token stream.

    ``noise_scale`` is the expected Euclidean norm of the per-token noise
    vector (prototypes have unit norm), so the signal-to-noise ratio does not
    depend on ``dim``.
    """

    segment_lengths: Sequence[int]
    inter_segment_cosine: float = 0.0
    noise_scale: float = 0.0
    dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if len(self.segment_lengths) == 0:
            raise ValueError("segment_lengths must not be empty")
        if any(int(n) < 1 for n in self.segment_lengths):
            raise ValueError("every segment length must be >= 1")
        if not -1.0 <= self.inter_segment_cosine <= 1.0:
            raise ValueError("inter_segment_cosine must lie in [-1, 1]")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.dim < 2 and len(self.segment_lengths) > 1 and abs(self.inter_segment_cosine) != 1.0:
            raise ValueError("dim must be >= 2 to realize an arbitrary cosine")


def _prototypes(n_segments: int, cosine: float, dim: int, rng: np.random.Generator):
    # Unit vectors rotating by a fixed angle in a random plane, so every
    # adjacent pair has exactly the requested cosine.
    theta = float(np.arccos(np.clip(cosine, -1.0, 1.0)))
    if dim == 1:
        e1 = np.ones(1)
        return np.array([np.cos(i * theta) * e1 for i in range(n_segments)])
    basis, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
    e1, e2 = basis[:, 0], basis[:, 1]
    angles = theta * np.arange(n_segments)
    return np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2


def generate_piecewise(spec: SyntheticSpec) -> tuple[np.ndarray, list[int]]:
    """Build a stream of segment prototypes plus isotropic noise.

    Returns the ``(N, dim)`` float32 token matrix and the 0-based segment
    start positions (always beginning with 0).
    """
    rng = np.random.default_rng(spec.seed)
    lengths = [int(n) for n in spec.segment_lengths]
    protos = _prototypes(len(lengths), spec.inter_segment_cosine, spec.dim, rng)
    rows = np.repeat(protos, lengths, axis=0)
    if spec.noise_scale > 0:
        noise = rng.standard_normal(rows.shape) * (spec.noise_scale / np.sqrt(spec.dim))
        rows = rows + noise
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(int).tolist()
    return rows.astype(np.float32), starts

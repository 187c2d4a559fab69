"""Sample representations: token text and grayscale byte images."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .behavior_log import BehaviorLog
from .errors import DataError, EmptyInput, ZeroWidth


@dataclass(frozen=True)
class TokenText:
    sample_id: str
    tokens: tuple[str, ...]
    sentence_breaks: tuple[int, ...] = ()

    def __post_init__(self):
        prev = 0
        for b in self.sentence_breaks:
            if not prev < b < len(self.tokens):
                raise ValueError(f"bad sentence break {b} for {len(self.tokens)} tokens")
            prev = b

    def __len__(self):
        return len(self.tokens)

    def sentences(self) -> list[tuple[str, ...]]:
        bounds = (0, *self.sentence_breaks, len(self.tokens))
        return [self.tokens[a:b] for a, b in zip(bounds, bounds[1:])]

    def serialize(self) -> str:
        """Space-separated tokens, one sentence per line."""
        return "\n".join(" ".join(s) for s in self.sentences())

    def to_bytes(self) -> bytes:
        return self.serialize().encode("utf-8")

    @classmethod
    def parse(cls, text: str, sample_id: str = "") -> "TokenText":
        tokens, breaks = [], []
        for line in text.splitlines():
            words = line.split()
            if not words:
                continue
            if tokens:
                breaks.append(len(tokens))
            tokens.extend(words)
        return cls(sample_id, tuple(tokens), tuple(breaks))


@dataclass(frozen=True)
class TextConfig:
    include_ret: bool = False
    include_exinfo: bool = False


def to_token_text(log: BehaviorLog, config: TextConfig | None = None) -> TokenText:
    """API-name stream with a sentence break at every change of calling pid."""
    cfg = config or TextConfig()
    tokens: list[str] = []
    breaks: list[int] = []
    prev_pid = None
    for a in log.actions:
        if prev_pid is not None and a.call_pid != prev_pid:
            breaks.append(len(tokens))
        prev_pid = a.call_pid
        tokens.append(a.api_name)
        if cfg.include_ret:
            tokens.append(f"ret={a.ret_value}")
        if cfg.include_exinfo:
            tokens.extend(f"ex={v.replace(' ', '_')}" for v in a.ex_info if v.strip())
    return TokenText(log.sample_id, tuple(tokens), tuple(breaks))


def pack_bits(bits: str) -> bytes:
    """Combine each run of eight '0'/'1' characters into one byte (MSB first)."""
    bits = "".join(bits.split())
    if len(bits) % 8:
        raise ValueError("bit string length must be a multiple of 8")
    return bytes(int(bits[i : i + 8], 2) for i in range(0, len(bits), 8))


def unpack_bits(data: bytes) -> str:
    return "".join(f"{b:08b}" for b in data)


@dataclass(frozen=True, eq=False)
class MalImage:
    width: int
    height: int
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width) or self.pixels.dtype != np.uint8:
            raise ValueError("pixel grid does not match declared dimensions")

    def __eq__(self, other):
        return isinstance(other, MalImage) and np.array_equal(self.pixels, other.pixels)

    def histogram(self) -> np.ndarray:
        """Normalized 256-bin pixel-intensity histogram."""
        counts = np.bincount(self.pixels.ravel(), minlength=256).astype(float)
        return counts / counts.sum()

    def to_pgm(self) -> bytes:
        header = f"P5\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.pixels.tobytes()

    def save_pgm(self, path) -> None:
        Path(path).write_bytes(self.to_pgm())

    def save_raw(self, path) -> None:
        Path(path).write_bytes(self.pixels.tobytes())


def read_pgm(data: bytes) -> MalImage:
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise DataError("only binary 8-bit PGM (P5, maxval 255) is supported")
    w, h = int(fields[1]), int(fields[2])
    body = data[pos + 1 : pos + 1 + w * h]
    return MalImage(w, h, np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy())


def resize_nearest(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    src_h, src_w = pixels.shape
    rows = (np.arange(height) * src_h) // height
    cols = (np.arange(width) * src_w) // width
    return pixels[rows[:, None], cols[None, :]]


def to_image(data: bytes, width: int, target: tuple[int, int] | None = None) -> MalImage:
    """Lay ``data`` out row-major at ``width`` bytes per row.

    The last row is zero-padded. ``target`` is ``(W, H)`` for a
    nearest-neighbour resize.
    """
    if width < 1:
        raise ZeroWidth(f"image width must be >= 1, got {width}")
    if len(data) == 0:
        raise EmptyInput("cannot build an image from empty data")
    height = -(-len(data) // width)
    buf = np.zeros(width * height, dtype=np.uint8)
    buf[: len(data)] = np.frombuffer(bytes(data), dtype=np.uint8)
    pixels = buf.reshape(height, width)
    if target is not None:
        tw, th = target
        if tw < 1 or th < 1:
            raise ZeroWidth(f"target size must be positive, got {target}")
        pixels = resize_nearest(pixels, tw, th)
    return MalImage(pixels.shape[1], pixels.shape[0], np.ascontiguousarray(pixels))


@dataclass(frozen=True)
class ImageConfig:
    width: int = 256
    target: tuple[int, int] | None = (64, 64)


def text_to_image(text: TokenText, config: ImageConfig | None = None) -> MalImage:
    cfg = config or ImageConfig()
    if not text.tokens:
        raise EmptyInput("token text is empty", text.sample_id)
    return to_image(text.to_bytes(), cfg.width, cfg.target)


def sample_to_image(log: BehaviorLog, config: ImageConfig | None = None,
                    text_config: TextConfig | None = None) -> MalImage:
    return text_to_image(to_token_text(log, text_config), config)

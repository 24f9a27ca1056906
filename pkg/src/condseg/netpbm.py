"""Binary netpbm serialization: P6 (RGB) and P5 (grayscale), maxval 255.

Images quantize as round(v*255); masks store their integer labels
directly, so both round-trip exactly. Parse failures report the byte
offset at which the data stopped making sense.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParseError

_WHITESPACE = b" \t\n\r\x0b\x0c"


def write_ppm(image: np.ndarray) -> bytes:
    """[3,H,W] floats in [0,1] -> binary P6 bytes."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise DimensionError(f"write_ppm expects [3,H,W], got {image.shape}")
    h, w = image.shape[1:]
    quantized = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + quantized.transpose(1, 2, 0).tobytes()


def write_pgm(mask: np.ndarray) -> bytes:
    """[H,W] integer labels (0..255) -> binary P5 bytes."""
    if mask.ndim != 2:
        raise DimensionError(f"write_pgm expects [H,W], got {mask.shape}")
    if mask.min() < 0 or mask.max() > 255:
        raise DimensionError("pgm labels must lie in [0, 255]")
    h, w = mask.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + mask.astype(np.uint8).tobytes()


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":  # comment runs to end of line
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    if pos >= n:
        raise ParseError("unexpected end of header", pos)
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def _parse_header(data: bytes, magic: bytes) -> tuple[int, int, int]:
    token, pos = _next_token(data, 0)
    if token != magic:
        raise ParseError(f"expected {magic.decode()} magic, got {token[:8]!r}", 0)
    dims = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        if not token.isdigit():
            raise ParseError(f"expected integer header field, got {token[:8]!r}",
                             pos - len(token))
        dims.append(int(token))
    width, height, maxval = dims
    if maxval != 255:
        raise ParseError(f"only maxval 255 is supported, got {maxval}", pos)
    if width < 1 or height < 1:
        raise ParseError(f"invalid dimensions {width}x{height}", pos)
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise ParseError("missing whitespace before payload", pos)
    return width, height, pos + 1


def read_ppm(data: bytes) -> np.ndarray:
    """Binary P6 bytes -> [3,H,W] float32 in [0,1]."""
    width, height, offset = _parse_header(data, b"P6")
    expected = width * height * 3
    payload = data[offset:offset + expected]
    if len(payload) < expected:
        raise ParseError(
            f"payload truncated: expected {expected} bytes, got {len(payload)}",
            offset + len(payload))
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return np.ascontiguousarray(pixels.transpose(2, 0, 1)).astype(np.float32) / 255.0


def read_pgm(data: bytes) -> np.ndarray:
    """Binary P5 bytes -> [H,W] uint8 labels."""
    width, height, offset = _parse_header(data, b"P5")
    expected = width * height
    payload = data[offset:offset + expected]
    if len(payload) < expected:
        raise ParseError(
            f"payload truncated: expected {expected} bytes, got {len(payload)}",
            offset + len(payload))
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()

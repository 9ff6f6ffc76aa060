"""Reading and writing 8-bit grayscale PGM files (P2 ASCII and P5 binary)."""

import numpy as np

__all__ = ["PgmError", "read_pgm", "write_pgm"]

_WHITESPACE = b" \t\r\n\v\f"


class PgmError(Exception):
    """Raised for malformed or truncated PGM data."""


class _Scanner:
    """Tokenizer for the PGM header and ASCII pixel section."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_separators(self) -> None:
        data = self.data
        n = len(data)
        while self.pos < n:
            b = data[self.pos : self.pos + 1]
            if b == b"#":
                nl = data.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            elif b in _WHITESPACE:
                self.pos += 1
            else:
                return

    def next_token(self, what: str) -> tuple[bytes, int]:
        self.skip_separators()
        if self.pos >= len(self.data):
            raise PgmError(f"unexpected end of file at byte {len(self.data)}: expected {what}")
        start = self.pos
        data = self.data
        n = len(data)
        while self.pos < n and data[self.pos : self.pos + 1] not in _WHITESPACE:
            self.pos += 1
        return data[start : self.pos], start

    def next_int(self, what: str) -> tuple[int, int]:
        token, offset = self.next_token(what)
        try:
            return int(token), offset
        except ValueError:
            raise PgmError(
                f"invalid {what} {token!r} at byte {offset}: expected an integer"
            ) from None


def _parse_pgm(data: bytes) -> np.ndarray:
    scanner = _Scanner(data)
    magic, offset = scanner.next_token("magic number")
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"unsupported magic {magic!r} at byte {offset}: expected P2 or P5")
    width, offset = scanner.next_int("width")
    if width < 1:
        raise PgmError(f"invalid width {width} at byte {offset}")
    height, offset = scanner.next_int("height")
    if height < 1:
        raise PgmError(f"invalid height {height} at byte {offset}")
    maxval, offset = scanner.next_int("maxval")
    if not 1 <= maxval <= 255:
        raise PgmError(f"unsupported maxval {maxval} at byte {offset}: expected 1..255")
    count = width * height

    if magic == b"P5":
        # Exactly one separator byte between maxval and the raster.
        if scanner.pos >= len(data):
            raise PgmError(f"unexpected end of file at byte {len(data)}: expected pixel data")
        scanner.pos += 1
        start = scanner.pos
        raster = data[start : start + count]
        if len(raster) < count:
            raise PgmError(
                f"truncated pixel data: expected {count} bytes from byte {start}, "
                f"file ends at byte {len(data)}"
            )
        values = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
        if maxval < 255:
            high = int(values.max())
            if high > maxval:
                bad = start + int(np.argmax(values > maxval))
                raise PgmError(f"pixel value {high} exceeds maxval {maxval} near byte {bad}")
        return values.reshape(height, width)

    values = np.empty(count, dtype=np.float64)
    for i in range(count):
        value, offset = scanner.next_int(f"pixel {i}")
        if not 0 <= value <= maxval:
            raise PgmError(
                f"pixel value {value} at byte {offset} outside 0..{maxval}"
            )
        values[i] = value
    return values.reshape(height, width)


def read_pgm(path) -> np.ndarray:
    """Read a PGM file into a float64 array of shape (height, width)."""
    with open(path, "rb") as fh:
        data = fh.read()
    return _parse_pgm(data)


def write_pgm(path, image: np.ndarray) -> None:
    """Write an image as binary P5, rounding intensities to the nearest integer."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {arr.shape}")
    height, width = arr.shape
    raster = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(raster.tobytes())

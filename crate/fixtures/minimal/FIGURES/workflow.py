"""Writes workflow.png: a small gradient image, using only the standard library."""
import os
import struct
import zlib

WIDTH, HEIGHT = 64, 32


def chunk(kind, data):
    body = kind + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


rows = b"".join(
    b"\x00" + bytes(v for x in range(WIDTH) for v in (4 * x, 8 * y, 160))
    for y in range(HEIGHT)
)
png = (
    b"\x89PNG\r\n\x1a\n"
    + chunk(b"IHDR", struct.pack(">IIBBBBB", WIDTH, HEIGHT, 8, 2, 0, 0, 0))
    + chunk(b"IDAT", zlib.compress(rows, 9))
    + chunk(b"IEND", b"")
)
out_dir = os.environ.get("RXIV_FIGURES_DIR", ".")
with open(os.path.join(out_dir, "workflow.png"), "wb") as fh:
    fh.write(png)

"""Writer for the engine's precomputed-embedding interchange file.

Layout (little-endian): magic "DSPNEMB1"; u32 d_w; u32 record count; then
per record u32 id length, id bytes (UTF-8), u32 n, f32*d_w z, f32*(n*d_w)
H row-major. The engine's reader rejects zero-token records, duplicate
ids, and trailing bytes, so those are refused at write time too.
"""

import struct

import numpy as np

MAGIC = b"DSPNEMB1"
_COUNT_OFFSET = len(MAGIC) + 4    # the count field sits after magic and d_w


class EmbeddingWriter:
    """Streams records to disk; the count is patched into the header on close.

    Records can be arbitrarily many and large, so nothing is buffered:
    the header goes out first with count 0 and close() seeks back to fix
    it. Use as a context manager.
    """

    def __init__(self, path, d_w: int):
        if d_w < 1:
            raise ValueError("d_w must be positive")
        self.d_w = d_w
        self.count = 0
        self._seen = set()
        self._fh = open(path, "wb")
        self._fh.write(MAGIC)
        self._fh.write(struct.pack("<II", d_w, 0))

    def add(self, rid: str, z, H) -> None:
        z = np.ascontiguousarray(z, dtype="<f4")
        H = np.ascontiguousarray(H, dtype="<f4")
        if z.shape != (self.d_w,):
            raise ValueError(f"record {rid!r}: z has shape {z.shape}, want ({self.d_w},)")
        if H.ndim != 2 or H.shape[1] != self.d_w or H.shape[0] < 1:
            raise ValueError(f"record {rid!r}: H has shape {H.shape}, "
                             f"want (n >= 1, {self.d_w})")
        if rid in self._seen:
            raise ValueError(f"duplicate record id {rid!r}")
        self._seen.add(rid)
        ident = rid.encode("utf-8")
        self._fh.write(struct.pack("<I", len(ident)))
        self._fh.write(ident)
        self._fh.write(struct.pack("<I", H.shape[0]))
        self._fh.write(z.tobytes())
        self._fh.write(H.tobytes())
        self.count += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(_COUNT_OFFSET)
        self._fh.write(struct.pack("<I", self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

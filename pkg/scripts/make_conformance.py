"""Regenerate the committed codec conformance tables.

8-bit formats dump to plain CSV, 16-bit ones to gzip (64k rows each).
Output is byte-deterministic; a test diffs the committed files against
a fresh dump.
"""

import gzip
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from taperbench import formats as F              # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "conformance")

NARROW = ["float8_e4m3", "posit8", "takum_linear8"]
WIDE = ["float16", "bfloat16", "posit16", "takum_linear16"]


def render(name: str) -> bytes:
    fid = F.parse_format(name)
    return F.dump_codes(fid, range(1 << fid.width)).encode()


def main() -> int:
    os.makedirs(OUT, exist_ok=True)
    for name in NARROW:
        path = os.path.join(OUT, f"{name}.codes.csv")
        with open(path, "wb") as f:
            f.write(render(name))
        print(path)
    for name in WIDE:
        path = os.path.join(OUT, f"{name}.codes.csv.gz")
        # mtime=0 keeps the archive byte-stable across rebuilds
        with open(path, "wb") as raw:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
                f.write(render(name))
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

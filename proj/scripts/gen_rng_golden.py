#!/usr/bin/env python3
"""Regenerates tests/data/philox_seed7_stream0.txt.

Reference: numpy's Philox bit generator keyed with [seed, stream_id],
converting each raw 64-bit output to a double as (x >> 11) * 2**-53.
"""
import pathlib

import numpy as np

SEED = 7
STREAM = 0
COUNT = 64

bg = np.random.Philox(key=np.array([SEED, STREAM], dtype=np.uint64))
raw = bg.random_raw(COUNT)
doubles = (raw >> np.uint64(11)) * 2.0**-53

out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "philox_seed7_stream0.txt"
out.parent.mkdir(parents=True, exist_ok=True)
with open(out, "w") as f:
    f.write(f"# philox4x64-10 key=({SEED},{STREAM}), doubles = (raw >> 11) * 2^-53\n")
    for v in doubles:
        f.write("%.17g\n" % v)
print(f"wrote {out}")

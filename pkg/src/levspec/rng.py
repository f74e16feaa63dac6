"""Seed-stream construction.

All randomness flows from a single 64-bit seed through numpy's Philox
(4x64-10) counter-based generator. Streams are derived deterministically:

    root = np.random.SeedSequence(seed)
    trajectory, detector, rin = root.spawn(3)

* ``trajectory``: 2 float64 normals for the stationary initial state
  (position then velocity), then the Wiener increments, one float32
  standard normal per integrator step in step order.
* ``detector``: one float32 standard normal per output sample of additive
  detector noise.
* ``rin``: one float64 normal for the constant-per-run intensity offset
  (drawn even when unused, so signal synthesis consumes a fixed draw count).

Gaussian variates for the bulk streams use numpy's float32 ziggurat and are
widened to float64 in the dynamics; the ~1e-7 relative quantization is far
below every statistical tolerance in this package and the float32 path is
several times faster. Chunked generation yields the same stream as one-shot
generation, so integrator chunk sizes never affect results.
"""

from __future__ import annotations

import numpy as np

STREAM_TRAJECTORY = 0
STREAM_DETECTOR = 1
STREAM_RIN = 2


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Return the Philox generator for one of the three derived streams."""
    children = np.random.SeedSequence(seed).spawn(3)
    return np.random.Generator(np.random.Philox(children[stream]))

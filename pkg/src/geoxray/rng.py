"""SplitMix64 stream: a tiny, fully specified generator so seeded phantoms and presets
are reproducible independent of numpy's bit-generator choices."""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self, shape=(), low=0.0, high=1.0):
        """Doubles in [low, high) from the top 53 bits."""
        count = int(np.prod(shape)) if shape != () else 1
        vals = np.array([(self.next_u64() >> 11) * 2.0**-53 for _ in range(count)])
        vals = low + (high - low) * vals
        return vals.reshape(shape) if shape != () else float(vals[0])

    def normal(self, shape=()):
        """Standard normals by Box-Muller (one pair per two uniforms)."""
        count = int(np.prod(shape)) if shape != () else 1
        m = (count + 1) // 2
        u1 = 1.0 - self.uniform((m,))
        u2 = self.uniform((m,))
        rad = np.sqrt(-2 * np.log(u1))
        z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])[:count]
        return z.reshape(shape) if shape != () else float(z[0])

"""Finite matrices over an integer index window of l2(Z)."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class WindowMatrix:
    """Square matrix indexed by ``[lo, hi]`` with a read-protected margin ``pad``.

    Only the interior ``[lo + pad, hi - pad]`` is certified.
    """

    window: tuple
    entries: np.ndarray = field(repr=False)
    pad: int = 0

    def __post_init__(self):
        lo, hi = (int(v) for v in self.window)
        if lo > hi:
            raise ValueError(f"empty window [{lo}, {hi}]")
        entries = np.asarray(self.entries, dtype=float)
        size = hi - lo + 1
        if entries.shape != (size, size):
            raise ValueError(f"entries shape {entries.shape} does not match window size {size}")
        if self.pad < 0:
            raise ValueError("pad must be non-negative")
        entries.setflags(write=False)
        object.__setattr__(self, "window", (lo, hi))
        object.__setattr__(self, "entries", entries)

    @classmethod
    def zeros(cls, lo, hi, pad=0):
        return cls((lo, hi), np.zeros((hi - lo + 1, hi - lo + 1)), pad)

    @classmethod
    def identity(cls, lo, hi, pad=0):
        return cls((lo, hi), np.eye(hi - lo + 1), pad)

    @property
    def lo(self):
        return self.window[0]

    @property
    def hi(self):
        return self.window[1]

    @property
    def size(self):
        return self.hi - self.lo + 1

    @property
    def interior(self):
        lo, hi = self.lo + self.pad, self.hi - self.pad
        if lo > hi:
            raise ValueError(f"pad {self.pad} leaves no certified interior in {self.window}")
        return lo, hi

    def indices(self):
        return np.arange(self.lo, self.hi + 1)

    def entry(self, n, m):
        return float(self.entries[n - self.lo, m - self.lo])

    def block(self, lo, hi):
        """Rows and columns ``[lo, hi]``, zero outside the stored window."""
        out = np.zeros((hi - lo + 1, hi - lo + 1))
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1, a - lo : b - lo + 1] = self.entries[
                a - self.lo : b - self.lo + 1, a - self.lo : b - self.lo + 1
            ]
        return out

    def interior_block(self):
        return self.block(*self.interior)

    def embed(self, lo, hi, pad=None):
        return WindowMatrix((lo, hi), self.block(lo, hi), self.pad if pad is None else pad)

    def norm(self):
        """Spectral norm of the certified interior block (dense SVD)."""
        blk = self.interior_block()
        if not np.any(blk):
            return 0.0
        return float(np.linalg.norm(blk, 2))

    def bandwidth(self, tol=0.0):
        i, j = np.nonzero(np.abs(self.entries) > tol)
        return int(np.max(np.abs(i - j))) if i.size else 0

    def _combine(self, other, sign):
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        pad = max(self.pad - (self.lo - lo), other.pad - (other.lo - lo), 0)
        return WindowMatrix((lo, hi), self.block(lo, hi) + sign * other.block(lo, hi), pad)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, scalar):
        return WindowMatrix(self.window, float(scalar) * self.entries, self.pad)

    __rmul__ = __mul__

    # -- export -----------------------------------------------------------

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# window={self.lo},{self.hi} pad={self.pad}\n")
        buf.write(",".join(["n"] + [str(m) for m in self.indices()]) + "\n")
        for n, row in zip(self.indices(), self.entries):
            buf.write(",".join([str(n)] + [repr(float(v)) for v in row]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        lines = text.strip("\n").split("\n")
        meta = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
        lo, hi = (int(v) for v in meta["window"].split(","))
        rows = [list(map(float, line.split(",")[1:])) for line in lines[2:]]
        return cls((lo, hi), np.array(rows).reshape(hi - lo + 1, hi - lo + 1), int(meta["pad"]))

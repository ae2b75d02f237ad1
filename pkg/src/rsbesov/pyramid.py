"""Coefficient pyramids (base + per-level details) and the RSBF binary format."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .scaling import Scaling

RSBF_MAGIC = b"RSBF"
RSBF_VERSION = 1


@dataclass
class CoeffPyramid:
    """A distribution represented by V_0 coefficients plus detail levels.

    base has shape `scaling.grid_shape(0)`; details[n] has shape
    (2^|s| - 1, *scaling.grid_shape(n)) for 0 <= n < N.
    """

    scaling: Scaling
    N: int
    base: np.ndarray
    details: list[np.ndarray]

    def __post_init__(self):
        if self.N < 0 or len(self.details) != self.N:
            raise ValueError("pyramid needs one detail block per level below N")
        npsi = 2**self.scaling.total - 1
        if self.base.shape != self.scaling.grid_shape(0):
            raise ValueError("base block has the wrong shape")
        for n, d in enumerate(self.details):
            if d.shape != (npsi, *self.scaling.grid_shape(n)):
                raise ValueError(f"detail block {n} has the wrong shape")

    @property
    def n_psi(self) -> int:
        return 2**self.scaling.total - 1

    @classmethod
    def zeros(cls, scaling: Scaling, N: int) -> "CoeffPyramid":
        npsi = 2**scaling.total - 1
        return cls(
            scaling,
            N,
            np.zeros(scaling.grid_shape(0)),
            [np.zeros((npsi, *scaling.grid_shape(n))) for n in range(N)],
        )

    def copy(self) -> "CoeffPyramid":
        return CoeffPyramid(
            self.scaling, self.N, self.base.copy(), [d.copy() for d in self.details]
        )

    def scaled(self, c: float) -> "CoeffPyramid":
        return CoeffPyramid(
            self.scaling, self.N, c * self.base, [c * d for d in self.details]
        )

    def plus(self, other: "CoeffPyramid") -> "CoeffPyramid":
        if other.scaling != self.scaling or other.N != self.N:
            raise ValueError("pyramid shape mismatch")
        return CoeffPyramid(
            self.scaling,
            self.N,
            self.base + other.base,
            [a + b for a, b in zip(self.details, other.details)],
        )

    def l2(self) -> float:
        tot = float(np.sum(self.base**2))
        for d in self.details:
            tot += float(np.sum(d**2))
        return tot**0.5

    def max_abs_diff(self, other: "CoeffPyramid") -> float:
        worst = float(np.max(np.abs(self.base - other.base))) if self.base.size else 0.0
        for a, b in zip(self.details, other.details):
            worst = max(worst, float(np.max(np.abs(a - b))))
        return worst

    def storage_size(self) -> int:
        return self.base.size + sum(d.size for d in self.details)


def save_rsbf(path, pyr: CoeffPyramid) -> None:
    """Write a pyramid: magic, version, d, s entries, N, then coefficients.

    Header integers are unsigned 32-bit little-endian; coefficients are
    little-endian float64, base first, then details in (n, psi-index,
    lexicographic x) order.
    """
    with open(path, "wb") as fh:
        fh.write(RSBF_MAGIC)
        fh.write(struct.pack("<I", RSBF_VERSION))
        fh.write(struct.pack("<I", pyr.scaling.d))
        for si in pyr.scaling.s:
            fh.write(struct.pack("<I", si))
        fh.write(struct.pack("<I", pyr.N))
        fh.write(np.ascontiguousarray(pyr.base, dtype="<f8").tobytes())
        for d in pyr.details:
            fh.write(np.ascontiguousarray(d, dtype="<f8").tobytes())


def load_rsbf(path) -> CoeffPyramid:
    with open(path, "rb") as fh:
        if fh.read(4) != RSBF_MAGIC:
            raise ValueError("not an RSBF file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != RSBF_VERSION:
            raise ValueError(f"unsupported RSBF version {version}")
        (d,) = struct.unpack("<I", fh.read(4))
        s = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(d))
        (N,) = struct.unpack("<I", fh.read(4))
        scaling = Scaling(s)
        npsi = 2**scaling.total - 1
        base = np.frombuffer(
            fh.read(8 * scaling.grid_size(0)), dtype="<f8"
        ).reshape(scaling.grid_shape(0))
        details = []
        for n in range(N):
            cnt = npsi * scaling.grid_size(n)
            arr = np.frombuffer(fh.read(8 * cnt), dtype="<f8")
            details.append(arr.reshape((npsi, *scaling.grid_shape(n))).copy())
        return CoeffPyramid(scaling, N, base.copy(), details)

"""Anisotropic scaling, scaled degrees, and periodic dyadic grids."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np


@dataclass(frozen=True)
class Scaling:
    """Per-dimension integer scaling exponents on the unit torus.

    The scaled norm is ||x||_s = max_i |x_i|^(1/s_i); level-n grids have
    per-dimension mesh 2^(-n*s_i) and 2^(n*|s|) points in total.
    """

    s: tuple[int, ...]

    def __post_init__(self):
        if len(self.s) < 1 or any(int(si) < 1 for si in self.s):
            raise ValueError("scaling needs d >= 1 entries, all >= 1")
        object.__setattr__(self, "s", tuple(int(si) for si in self.s))

    @property
    def d(self) -> int:
        return len(self.s)

    @property
    def total(self) -> int:
        return int(sum(self.s))

    def snorm(self, x) -> float:
        """||x||_s of a single displacement (nearest-image on the torus)."""
        x = np.asarray(x, dtype=float)
        x = wrap_displacement(x)
        return float(np.max(np.abs(x) ** (1.0 / np.array(self.s, dtype=float))))

    def snorm_array(self, xs: np.ndarray) -> np.ndarray:
        """||.||_s along the last axis of an array of displacements."""
        xs = wrap_displacement(np.asarray(xs, dtype=float))
        expo = 1.0 / np.array(self.s, dtype=float)
        return np.max(np.abs(xs) ** expo, axis=-1)

    def scaled_degree(self, k) -> int:
        """|k|_s = sum_i s_i k_i of a multi-index."""
        return int(sum(si * int(ki) for si, ki in zip(self.s, k)))

    def grid_shape(self, n: int) -> tuple[int, ...]:
        return tuple(2 ** (n * si) for si in self.s)

    def grid_size(self, n: int) -> int:
        return 2 ** (n * self.total)

    def grid_points(self, n: int) -> np.ndarray:
        """All points of Lambda_n, shape (*grid_shape, d), lexicographic."""
        axes = [np.arange(2 ** (n * si)) * 2.0 ** (-n * si) for si in self.s]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def multi_indices_below(self, gamma: float) -> list[tuple[int, ...]]:
        """All k in N^d with |k|_s < gamma, ordered by (|k|_s, k)."""
        if gamma <= 0:
            return []
        ranges = [range(int(np.ceil(gamma / si)) + 1) for si in self.s]
        ks = [k for k in product(*ranges) if self.scaled_degree(k) < gamma]
        ks.sort(key=lambda k: (self.scaled_degree(k), k))
        return ks

    def nearest_grid_index(self, x: np.ndarray, n: int) -> tuple[np.ndarray, ...]:
        """Index of the nearest Lambda_n point (half-up ties), idempotent on Lambda_n."""
        x = np.asarray(x, dtype=float)
        out = []
        for i, si in enumerate(self.s):
            m = 2 ** (n * si)
            out.append(np.floor(x[..., i] * m + 0.5).astype(int) % m)
        return tuple(out)


def wrap_displacement(x: np.ndarray) -> np.ndarray:
    """Nearest-image representative of a displacement, in [-1/2, 1/2)^d."""
    return (np.asarray(x, dtype=float) + 0.5) % 1.0 - 0.5


def translation_offsets(scaling: Scaling, n: int) -> list[tuple[int, ...]]:
    """The nonzero offsets of E_n: h with 2^(n*s_i) h_i in {-1, 0, 1}.

    Returned as integer index shifts relative to the level-n grid.
    """
    cands = product(*[(-1, 0, 1) for _ in range(scaling.d)])
    return [h for h in cands if any(h)]

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

from .rational import TripleError

logger = logging.getLogger(__name__)


INNER_RADIUS = 1.0
OUTER_RADIUS = 2.0
SECTOR_EPSILON = 0.05
WINDOW_MARGIN = 0.08
MAX_SAMPLING_ROUNDS = 60


@dataclass(frozen=True)
class OverlapComponent:
    """
    A connected piece of a multiple overlap, described by a sampling window.

    Attributes:
        labels (Tuple[int, ...]): Patches meeting on the piece.
        representative (complex): A point of the piece, relative to the base point.
        radii (Tuple[float, float]): Radial range of the window around the base point.
        angles (Tuple[float, float]): Angular range of the window.
    """
    labels: Tuple[int, ...]
    representative: complex
    radii: Tuple[float, float]
    angles: Tuple[float, float]


class CoverCombinatorics:
    """
    The cover of the base by U_0 = complement of D_1 and the sectors U_1, ..., U_(k+1) of D_2,
    each sector an epsilon-neighbourhood of the angular range 2 pi (s - 1)/(k + 1) .. 2 pi s/(k + 1).

    Each patch carries a section of the circle bundle. Its position on the fiber, in fractions
    of a turn, is (1/2 - s)/(k + 1) on sector s and k arg(z - b)/(2 pi) on U_0, which is
    the trivialization of U_0 twisted by exp(i k theta) against the disk. Transport from patch a
    to patch b moves forward by advance(b, a) = (p_b - p_a) mod 1 of a turn, and three
    transports compose to a full extra turn exactly when the twist bit is set.

    Attributes:
        bundle_degree (int): k.
        base_point (complex): Centre b of the disks.
        epsilon (float): Width of the sector neighbourhoods.
    """

    def __init__(self, bundle_degree: int, base_point: complex = 0j, epsilon: float = SECTOR_EPSILON) -> None:
        if bundle_degree < 1:
            raise TripleError(f"Bundle degree must be at least 1. Received: {bundle_degree}")
        self.bundle_degree = int(bundle_degree)
        self.base_point = complex(base_point)
        self.epsilon = float(epsilon)

    def __repr__(self) -> str:
        return f"CoverCombinatorics(k={self.bundle_degree}, base_point={self.base_point})"

    @property
    def sectors(self) -> int:
        return self.bundle_degree + 1

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(range(self.sectors + 1))

    def sector_angles(self, sector: int) -> Tuple[float, float]:
        width = 2 * np.pi / self.sectors
        return (sector - 1) * width, sector * width

    def next_sector(self, sector: int) -> int:
        return sector % self.sectors + 1

    def _relative(self, z) -> np.ndarray:
        return np.asarray(z, dtype=complex) - self.base_point

    def sector_argument(self, sector: int, z) -> np.ndarray:
        """arg(z - b) on the branch centred on the sector."""
        middle = 2 * np.pi * (sector - 0.5) / self.sectors
        angle = np.angle(self._relative(z))
        return angle + 2 * np.pi * np.round((middle - angle) / (2 * np.pi))

    def log_branch(self, sector: int, z) -> np.ndarray:
        """log_s((z - b)^(k+1)), with imaginary part running from 0 to 2 pi across the sector."""
        relative = self._relative(z)
        return (self.sectors * np.log(np.abs(relative))
                + 1j * (self.sectors * self.sector_argument(sector, z) - 2 * np.pi * (sector - 1)))

    def contains(self, label: int, z) -> np.ndarray:
        relative = self._relative(z)
        radius = np.abs(relative)
        if label == 0:
            return radius > INNER_RADIUS
        if label not in self.labels:
            raise TripleError(f"Patch {label} is not part of the cover.")
        low, high = self.sector_angles(label)
        angle = self.sector_argument(label, z)
        inside = (angle >= low) & (angle <= high)

        def ray_distance(ray_angle: float) -> np.ndarray:
            offset = np.abs(angle - ray_angle)
            return np.where(offset < np.pi / 2, radius * np.sin(offset), radius)

        near = (ray_distance(low) < self.epsilon) | (ray_distance(high) < self.epsilon)
        return (radius < OUTER_RADIUS) & (inside | near)

    def contains_all(self, labels, z) -> np.ndarray:
        out = np.ones(np.shape(z), dtype=bool)
        for label in labels:
            out &= self.contains(label, z)
        return out

    def position(self, label: int, z) -> np.ndarray:
        """Complex fiber position; its real part mod 1 is the position in turns."""
        if label == 0:
            relative = self._relative(z)
            return self.bundle_degree * np.log(relative) / (2j * np.pi)
        return np.full(np.shape(z), (0.5 - label) / self.sectors, dtype=complex)

    def advance(self, target: int, source: int, z) -> np.ndarray:
        """Complex amount of a turn covered moving forward from `source` to `target`."""
        difference = self.position(target, z) - self.position(source, z)
        return np.mod(difference.real, 1.0) + 1j * difference.imag

    def orientation(self, target: int, source: int, z) -> np.ndarray:
        """True when `target` lies less than half a turn ahead of `source`."""
        return self.advance(target, source, z).real < 0.5

    def twist(self, first: int, middle: int, last: int, z) -> np.ndarray:
        """
        Bit of rho[first, middle] rho[middle, last] = rho[first, last] G[last]^bit,
        i.e. whether last -> middle -> first goes once round the fiber.
        """
        total = (self.advance(first, middle, z) + self.advance(middle, last, z)
                 - self.advance(first, last, z)).real
        return np.rint(total).astype(int)

    @cached_property
    def overlap_pairs(self) -> List[Tuple[int, int]]:
        """Ordered pairs of distinct patches with nonempty overlap."""
        pairs = [(0, s) for s in range(1, self.sectors + 1)]
        pairs += list(itertools.combinations(range(1, self.sectors + 1), 2))
        return pairs + [(b, a) for a, b in pairs]

    def pair_window(self, first: int, second: int) -> OverlapComponent:
        labels = tuple(sorted((first, second)))
        if labels[0] == 0:
            low, high = self.sector_angles(labels[1])
            middle = 0.5 * (low + high)
            return OverlapComponent(labels, 0.5 * (INNER_RADIUS + OUTER_RADIUS) * np.exp(1j * middle),
                                    (INNER_RADIUS, OUTER_RADIUS), (low - WINDOW_MARGIN, high + WINDOW_MARGIN))
        adjacent = self.next_sector(labels[0]) == labels[1] or self.next_sector(labels[1]) == labels[0]
        reach = OUTER_RADIUS if adjacent else self.epsilon
        return OverlapComponent(labels, 0j, (0.0, reach), (0.0, 2 * np.pi))

    @cached_property
    def components(self) -> List[OverlapComponent]:
        """Components of the triple overlaps."""
        out = []
        for sector in range(1, self.sectors + 1):
            boundary = self.sector_angles(sector)[1]
            labels = (0, sector, self.next_sector(sector))
            out.append(OverlapComponent(
                labels,
                0.5 * (INNER_RADIUS + OUTER_RADIUS) * np.exp(1j * boundary),
                (INNER_RADIUS, OUTER_RADIUS),
                (boundary - WINDOW_MARGIN, boundary + WINDOW_MARGIN),
            ))
        for labels in itertools.combinations(range(1, self.sectors + 1), 3):
            out.append(OverlapComponent(labels, 0j, (0.0, self.epsilon), (0.0, 2 * np.pi)))
        return out

    def twist_table(self) -> Dict[Tuple[int, int, int, int], int]:
        """Twist bit per (first, middle, last, component index) over every ordering of each component."""
        table = {}
        for index, component in enumerate(self.components):
            point = self.base_point + component.representative
            for first, middle, last in itertools.permutations(component.labels):
                table[(first, middle, last, index)] = int(self.twist(first, middle, last, point))
        return table

    def sample(self, component: OverlapComponent, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform points of the component by rejection from its window."""
        accepted: List[np.ndarray] = []
        found = 0
        low_r, high_r = component.radii
        low_a, high_a = component.angles
        for _ in range(MAX_SAMPLING_ROUNDS):
            draws = max(4 * count, 2000)
            radius = np.sqrt(rng.uniform(low_r ** 2, high_r ** 2, draws))
            angle = rng.uniform(low_a, high_a, draws)
            points = self.base_point + radius * np.exp(1j * angle)
            keep = points[self.contains_all(component.labels, points)]
            accepted.append(keep)
            found += keep.size
            if found >= count:
                return np.concatenate(accepted)[:count]
        raise TripleError(f"Could not sample {count} points from the overlap of patches {component.labels}.")

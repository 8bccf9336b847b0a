import json
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from geometry import SurfaceChartAtlas, FieldGenerator, frame_apply, overlap_residual

logger = logging.getLogger(__name__)


class GaugeError(ValueError):
    """Raised for malformed connections, singularity data or broken unitary frames."""


def dagger(field: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(field, -1, -2))


def identity_field(rank: int) -> np.ndarray:
    return np.eye(rank, dtype=complex).reshape((1, 1, 1, 1, rank, rank))


@dataclass(frozen=True)
class DiracSingularitySpec:
    """
    A Dirac-type singular point of a monopole.

    Attributes:
        chart (int): Chart holding the point.
        center (complex): Chart coordinate z0 of the base point q = pi(p).
        theta (float): Fiber position theta0 of p.
        weights (Tuple[int, ...]): Weight vector k_1 >= ... >= k_n.
        radius (float): Excision radius epsilon in geodesic units.
    """
    chart: int
    center: complex
    theta: float
    weights: Tuple[int, ...]
    radius: float

    def __post_init__(self):
        if self.chart not in (0, 1):
            raise GaugeError(f"Singularity chart must be 0 or 1. Received: {self.chart}")
        if list(self.weights) != sorted(self.weights, reverse=True):
            raise GaugeError(f"Singularity weights must be nonincreasing. Received: {list(self.weights)}")
        if self.radius <= 0:
            raise GaugeError(f"Excision radius must be positive. Received: {self.radius}")

    @property
    def rank(self) -> int:
        return len(self.weights)

    @property
    def charge(self) -> int:
        return int(sum(self.weights))

    def to_dict(self) -> Dict:
        return {
            'chart': self.chart,
            'z': [float(np.real(self.center)), float(np.imag(self.center))],
            'theta': float(self.theta),
            'weights': [int(k) for k in self.weights],
            'radius': float(self.radius),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "DiracSingularitySpec":
        return cls(
            chart=int(data['chart']),
            center=complex(data['z'][0], data['z'][1]),
            theta=float(data.get('theta', 0.0)),
            weights=tuple(int(k) for k in data['weights']),
            radius=float(data['radius']),
        )


class UnitaryConnection:
    """
    A unitary connection with Higgs field on a rank-n bundle over X, in a unitary frame.

    The bundle transition between the chart frames is the identity, so A_xi and phi are
    functions on the atlas while A_vz and A_vzbar carry the (1, 0) and (0, 1) weights.

    Attributes:
        atlas (SurfaceChartAtlas): Atlas the components live on.
        a_vz, a_vzbar, a_xi, higgs (np.ndarray): Component fields of shape (2, nx, nx, nt, n, n).
        singularities (List[DiracSingularitySpec]): Dirac points excised from norms and integrals.
    """
    COMPONENT_KINDS = {
        'a_vz': 'z',
        'a_vzbar': 'zbar',
        'a_xi': 'function',
        'higgs': 'function',
    }

    def __init__(self,
                 atlas: SurfaceChartAtlas,
                 a_vz: np.ndarray,
                 a_xi: np.ndarray,
                 higgs: np.ndarray,
                 a_vzbar: Optional[np.ndarray] = None,
                 singularities: Iterable[DiracSingularitySpec] = ()) -> None:
        self.atlas = atlas
        self.a_vz = atlas.check_field(np.asarray(a_vz, dtype=complex))
        self.a_vzbar = -dagger(self.a_vz) if a_vzbar is None else atlas.check_field(np.asarray(a_vzbar, dtype=complex))
        self.a_xi = atlas.check_field(np.asarray(a_xi, dtype=complex))
        self.higgs = atlas.check_field(np.asarray(higgs, dtype=complex))
        self.singularities = list(singularities)

        ranks = {component.shape[-1] for component in self.components().values()}
        ranks |= {component.shape[-2] for component in self.components().values()}
        if len(ranks) != 1:
            raise GaugeError(f"Connection components disagree on the rank: {sorted(ranks)}")
        self.rank = ranks.pop()
        for singularity in self.singularities:
            if singularity.rank != self.rank:
                raise GaugeError(
                    f"Singularity weights {list(singularity.weights)} do not match rank {self.rank}."
                )

    def components(self) -> Dict[str, np.ndarray]:
        return {'a_vz': self.a_vz, 'a_vzbar': self.a_vzbar, 'a_xi': self.a_xi, 'higgs': self.higgs}

    def component(self, direction: str) -> np.ndarray:
        """Connection matrix along a frame direction."""
        lookup = {'v_z': self.a_vz, 'v_zbar': self.a_vzbar, 'xi': self.a_xi}
        if direction not in lookup:
            raise GaugeError(f"Direction '{direction}' is not supported.")
        return lookup[direction]

    def anti_hermitian_defect(self) -> float:
        """Largest violation of A_xi = -A_xi^+, phi = -phi^+ and A_vzbar = -A_vz^+."""
        defects = [
            np.max(np.abs(self.a_xi + dagger(self.a_xi))),
            np.max(np.abs(self.higgs + dagger(self.higgs))),
            np.max(np.abs(self.a_vzbar + dagger(self.a_vz))),
        ]
        return float(max(defects))

    def transition_defect(self) -> float:
        """Largest fringe mismatch of the components under the chart transition."""
        return max(overlap_residual(self.atlas, value, self.COMPONENT_KINDS[name])
                   for name, value in self.components().items())

    def to_dict(self) -> Dict:
        """JSON container: per-chart component arrays as [re, im] pairs plus the singularity list."""
        def encode(values: np.ndarray) -> Dict:
            return {'shape': list(values.shape), 're': values.real.ravel().tolist(), 'im': values.imag.ravel().tolist()}

        return {
            'atlas': {
                'k': self.atlas.bundle_degree,
                'n_z': self.atlas.n_z,
                'n_theta': self.atlas.n_theta,
            },
            'rank': self.rank,
            'components': {name: encode(value) for name, value in self.components().items()},
            'singularities': [singularity.to_dict() for singularity in self.singularities],
        }

    @classmethod
    def from_dict(cls, atlas: SurfaceChartAtlas, data: Dict) -> "UnitaryConnection":
        def decode(block: Dict) -> np.ndarray:
            values = np.asarray(block['re']) + 1j * np.asarray(block['im'])
            return values.reshape(block['shape'])

        components = {name: decode(block) for name, block in data['components'].items()}
        return cls(atlas,
                   a_vz=components['a_vz'],
                   a_vzbar=components.get('a_vzbar'),
                   a_xi=components['a_xi'],
                   higgs=components['higgs'],
                   singularities=[DiracSingularitySpec.from_dict(s) for s in data.get('singularities', [])])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def zeros(atlas: SurfaceChartAtlas, rank: int) -> np.ndarray:
    return np.zeros(atlas.grid_shape + (1, rank, rank), dtype=complex)


def trivial_connection(atlas: SurfaceChartAtlas, rank: int = 1) -> UnitaryConnection:
    return UnitaryConnection(atlas, zeros(atlas, rank), zeros(atlas, rank), zeros(atlas, rank))


def contact_connection(atlas: SurfaceChartAtlas,
                       constant: float,
                       rank: int = 1,
                       singularities: Iterable[DiracSingularitySpec] = ()) -> UnitaryConnection:
    """
    A = -i C alpha times the identity: A_xi = -i C, the horizontal parts and phi vanish.
    This solves the Hermite-Einstein equation with constant C.
    """
    a_xi = np.broadcast_to(-1j * constant * identity_field(rank), atlas.grid_shape + (1, rank, rank)).copy()
    a_xi[~atlas.active] = 0
    return UnitaryConnection(atlas, zeros(atlas, rank), a_xi, zeros(atlas, rank), singularities=singularities)


def random_connection(atlas: SurfaceChartAtlas,
                      rank: int,
                      seed: int = 0,
                      terms: int = 2,
                      scale: float = 0.5,
                      max_degree: int = 2,
                      fiber_invariant: bool = False,
                      with_higgs: bool = True) -> UnitaryConnection:
    """
    A random smooth global unitary connection.

    A_vz = sum_j M_j v_z(h_j) with real global functions h_j and matrix global functions M_j,
    A_vzbar = -A_vz^+, and A_xi, phi anti-Hermitian global functions. Every component is
    consistent across the chart overlap by construction.
    """
    generator = FieldGenerator(atlas, seed=seed, max_degree=max_degree)
    a_vz = zeros(atlas, rank)
    for _ in range(terms):
        potential = generator.generate('real', 1, fiber_invariant)
        weight = generator.generate('matrix', rank, fiber_invariant)
        a_vz = a_vz + scale * weight * frame_apply(atlas, potential, 'v_z')
    a_xi = scale * generator.generate('anti_hermitian', rank, fiber_invariant)
    higgs = scale * generator.generate('anti_hermitian', rank, fiber_invariant) if with_higgs else zeros(atlas, rank)
    return UnitaryConnection(atlas, a_vz=a_vz, a_xi=a_xi, higgs=higgs)


def unitary_exponential(anti_hermitian: np.ndarray) -> np.ndarray:
    """exp(X) for anti-Hermitian X, pointwise, via the eigendecomposition of iX."""
    eigenvalues, vectors = np.linalg.eigh(1j * anti_hermitian)
    return (vectors * np.exp(-1j * eigenvalues)[..., None, :]) @ dagger(vectors)


def random_unitary_gauge(atlas: SurfaceChartAtlas, rank: int, seed: int = 0,
                         scale: float = 1.0, max_degree: int = 2) -> np.ndarray:
    generator = FieldGenerator(atlas, seed=seed, max_degree=max_degree)
    gauge = unitary_exponential(scale * generator.generate('anti_hermitian', rank))
    gauge[~atlas.active] = 0
    return gauge


def gauge_transform(conn: UnitaryConnection, gauge: np.ndarray) -> UnitaryConnection:
    """
    A -> g^-1 A g + g^-1 dg and phi -> g^-1 phi g for a unitary gauge field g.
    Sections transform as s -> g^-1 s, so g^-1 intertwines the old and new connections.
    """
    atlas = conn.atlas
    gauge = atlas.check_field(gauge)
    inverse = np.zeros_like(gauge)
    active = atlas.active
    inverse[active] = np.linalg.inv(gauge[active])

    def transform(component: np.ndarray, direction: Optional[str], kind: str) -> np.ndarray:
        out = inverse @ component @ gauge
        if direction is not None:
            out = out + inverse @ frame_apply(atlas, gauge, direction)
        return atlas.synchronize(out, kind)

    return UnitaryConnection(
        atlas,
        a_vz=transform(conn.a_vz, 'v_z', 'z'),
        a_vzbar=transform(conn.a_vzbar, 'v_zbar', 'zbar'),
        a_xi=transform(conn.a_xi, 'xi', 'function'),
        higgs=transform(conn.higgs, None, 'function'),
        singularities=conn.singularities,
    )


def _block_diagonal(fields: Sequence[np.ndarray]) -> np.ndarray:
    nt = max(f.shape[3] for f in fields)
    shape = fields[0].shape[:3] + (nt,)
    total = sum(f.shape[-1] for f in fields)
    out = np.zeros(shape + (total, total), dtype=complex)
    offset = 0
    for f in fields:
        size = f.shape[-1]
        out[..., offset:offset + size, offset:offset + size] = f
        offset += size
    return out


def direct_sum(connections: Sequence[UnitaryConnection]) -> UnitaryConnection:
    """Block-diagonal sum; singular points at the same location merge their weights."""
    if not connections:
        raise GaugeError("direct_sum needs at least one connection.")
    atlas = connections[0].atlas
    if any(conn.atlas is not atlas for conn in connections):
        raise GaugeError("Connections in a direct sum must share one atlas.")

    def location(s: DiracSingularitySpec) -> Tuple:
        return (s.chart, s.center, s.theta, s.radius)

    keys = list(dict.fromkeys(location(s) for conn in connections for s in conn.singularities))
    singularities = []
    for key in keys:
        weights: List[int] = []
        for conn in connections:
            match = [s for s in conn.singularities if location(s) == key]
            weights.extend(match[0].weights if match else [0] * conn.rank)
        singularities.append(DiracSingularitySpec(key[0], key[1], key[2],
                                                  tuple(sorted(weights, reverse=True)), key[3]))
    return UnitaryConnection(
        atlas,
        a_vz=_block_diagonal([c.a_vz for c in connections]),
        a_vzbar=_block_diagonal([c.a_vzbar for c in connections]),
        a_xi=_block_diagonal([c.a_xi for c in connections]),
        higgs=_block_diagonal([c.higgs for c in connections]),
        singularities=singularities,
    )


def compress(conn: UnitaryConnection, size: int) -> UnitaryConnection:
    """Induced connection on the span of the first `size` frame vectors: A -> P A P."""
    if not 0 < size <= conn.rank:
        raise GaugeError(f"Sub-bundle rank must be between 1 and {conn.rank}. Received: {size}")
    block = slice(0, size)
    sub_weights = []
    for s in conn.singularities:
        sub_weights.append(DiracSingularitySpec(s.chart, s.center, s.theta, tuple(s.weights[:size]), s.radius))
    return UnitaryConnection(
        conn.atlas,
        a_vz=conn.a_vz[..., block, block],
        a_vzbar=conn.a_vzbar[..., block, block],
        a_xi=conn.a_xi[..., block, block],
        higgs=conn.higgs[..., block, block],
        singularities=sub_weights,
    )

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment

from triples import IdentityCheck, TwistedTriple
from .curve import SpectralError

logger = logging.getLogger(__name__)


EIGEN_RESIDUAL = 1e-10
RECONSTRUCTION_CONDITION = 1e12
SEPARATION_RATIO = 1e-6
LAW_TOLERANCE = 1e-9


@dataclass
class EigenlineSample:
    """
    One sheet of the spectral curve over a base point: eta and its eigenline, scaled so the
    first entry that is not negligible equals 1.
    """
    z: complex
    eta: complex
    vector: np.ndarray

    def residual(self, matrix: np.ndarray) -> float:
        """||(G - eta) v|| relative to ||G|| ||v||."""
        defect = matrix @ self.vector - self.eta * self.vector
        scale = max(np.linalg.norm(matrix), 1e-300) * np.linalg.norm(self.vector)
        return float(np.linalg.norm(defect) / scale)

    def to_dict(self) -> Dict:
        out = {'z_re': self.z.real, 'z_im': self.z.imag, 'eta_re': self.eta.real, 'eta_im': self.eta.imag}
        for j, entry in enumerate(self.vector):
            out[f"v{j}_re"], out[f"v{j}_im"] = float(entry.real), float(entry.imag)
        return out


def _normalize(vector: np.ndarray) -> np.ndarray:
    magnitude = np.abs(vector)
    first = int(np.flatnonzero(magnitude > 1e-8 * np.max(magnitude))[0])
    return vector / vector[first]


def _eigenpairs(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues sorted by real then imaginary part, with eigenvectors as columns."""
    values, vectors = linalg.eig(matrix)
    order = np.lexsort((values.imag, values.real))
    values, vectors = values[order], vectors[:, order]
    if values.size > 1:
        gaps = np.abs(values[:, None] - values[None, :])[~np.eye(values.size, dtype=bool)]
        if np.min(gaps) < SEPARATION_RATIO * max(1.0, float(np.max(np.abs(values)))):
            raise SpectralError("Eigenvalues nearly collide; the point is too close to the discriminant.")
    return values, vectors


def eigenline_samples(monodromy, z_points: Sequence[complex]) -> List[EigenlineSample]:
    """
    n samples per base point, one per sheet.

    Raises:
        SpectralError: a point lies at or near a zero of the discriminant.
    """
    samples = []
    points = np.atleast_1d(np.asarray(z_points, dtype=complex))
    matrices = monodromy(points)
    for z, matrix in zip(points, matrices):
        values, vectors = _eigenpairs(matrix)
        for j in range(values.size):
            sample = EigenlineSample(complex(z), complex(values[j]), _normalize(vectors[:, j]))
            if sample.residual(matrix) > EIGEN_RESIDUAL:
                raise SpectralError(f"Eigenline at z = {z:.6g} has residual {sample.residual(matrix):.3e}.")
            samples.append(sample)
    return samples


def pushforward_reconstruct(samples: Sequence[EigenlineSample]) -> np.ndarray:
    """
    G(z) = V diag(eta) V^-1 from the eigenlines over one base point.

    Raises:
        SpectralError: samples over different points, or eigenvectors close to dependent.
    """
    if not samples:
        raise SpectralError("No eigenlines to reconstruct from.")
    if len({s.z for s in samples}) != 1:
        raise SpectralError("Reconstruction needs samples over a single base point.")
    basis = np.stack([s.vector for s in samples], axis=1)
    if basis.shape[0] != basis.shape[1]:
        raise SpectralError(f"Need {basis.shape[0]} eigenlines, received {basis.shape[1]}.")
    if np.linalg.cond(basis) > RECONSTRUCTION_CONDITION:
        raise SpectralError("Eigenvector matrix is ill-conditioned.")
    weighted = basis * np.array([s.eta for s in samples])[None, :]
    return linalg.solve(basis.T, weighted.T).T


# Lifting triples to the spectral curve


def _induced(triple: TwistedTriple, target: int, source: int, points: np.ndarray,
             reference: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scalars c with rho[target, source] v_source(eta) = c v_target(eta) per reference sheet, and
    the relative distance of rho v_source from the target eigenline.
    """
    rho = triple.rho(target, source)(points)
    source_g, target_g = triple.monodromy[source](points), triple.monodromy[target](points)
    scalars = np.empty(reference.shape, dtype=complex)
    defects = np.empty(reference.shape[0])
    for p in range(points.size):
        lines = {}
        for label, matrix in ((source, source_g[p]), (target, target_g[p])):
            values, vectors = _eigenpairs(matrix)
            rows, columns = linear_sum_assignment(np.abs(reference[p][:, None] - values[None, :]))
            lines[label] = np.stack([_normalize(vectors[:, c]) for c in columns[np.argsort(rows)]], axis=1)
        image = rho[p] @ lines[source]
        target_lines = lines[target]
        scalars[p] = np.einsum('ij,ij->j', target_lines.conj(), image) / np.einsum('ij,ij->j', target_lines.conj(),
                                                                                   target_lines)
        remainder = image - target_lines * scalars[p][None, :]
        defects[p] = float(np.max(np.linalg.norm(remainder, axis=0)
                                  / np.maximum(np.linalg.norm(image, axis=0), 1e-300)))
    return scalars, defects


def _reference(triple: TwistedTriple, label: int, points: np.ndarray) -> np.ndarray:
    matrices = triple.monodromy[label](points)
    return np.stack([_eigenpairs(m)[0] for m in matrices])


@dataclass
class SpectralLift:
    """
    A triple pushed to the spectral curve: per overlap and per sheet the scalar by which rho
    acts on eigenlines, with the eta-twisted laws checked at the sample points.

    Attributes:
        pairs (Dict[Tuple[int, int], Dict[str, np.ndarray]]): points, eta and scalars per ordered overlap.
        components (Dict[Tuple[int, int, int, int], Dict[str, np.ndarray]]): points, eta and the
            scalars of (first, middle), (middle, last), (first, last) per ordering of each component.
        checks (List[IdentityCheck]): Collinearity, pair and triple laws.
    """
    pairs: Dict[Tuple[int, int], Dict[str, np.ndarray]] = field(default_factory=dict)
    components: Dict[Tuple[int, int, int, int], Dict[str, np.ndarray]] = field(default_factory=dict)
    checks: List[IdentityCheck] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def violations(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> Dict:
        return {
            'valid': self.valid,
            'violations': self.violations,
            'checks': [{'name': c.name, 'residual': c.residual, 'passed': c.passed} for c in self.checks],
        }

    def rows(self) -> List[Dict]:
        """Flat per-sample records of the pair scalars, for CSV output."""
        out = []
        for (a, b), data in sorted(self.pairs.items()):
            for p, z in enumerate(data['points']):
                for sheet in range(data['eta'].shape[1]):
                    value, eta = data['scalars'][p, sheet], data['eta'][p, sheet]
                    out.append({'target': a, 'source': b, 'sheet': sheet, 'z_re': z.real, 'z_im': z.imag,
                                'eta_re': eta.real, 'eta_im': eta.imag,
                                'value_re': value.real, 'value_im': value.imag})
        return out


def _law(name: str, left: np.ndarray, right: np.ndarray, tolerance: float) -> IdentityCheck:
    residual = float(np.max(np.abs(left - right)) / max(1.0, float(np.max(np.abs(right)))))
    return IdentityCheck(name, residual, bool(np.isfinite(residual) and residual < tolerance))


def lift_cocycle(triple: TwistedTriple,
                 samples: int = 64,
                 seed: int = 0,
                 z_points: Optional[Sequence[complex]] = None,
                 tolerance: float = LAW_TOLERANCE) -> SpectralLift:
    """
    Induced maps rho' on eigenlines and the laws they obey: rho'[a,b] rho'[b,a] = eta on every
    overlap and rho'[f,m] rho'[m,l] = rho'[f,l] eta^bit on every triple-overlap component, with the
    twist bit of the cover. When z_points are given, each overlap uses the points that lie in it.

    Raises:
        SpectralError: a sample point is too close to the discriminant to tell sheets apart.
    """
    cover = triple.cover
    rng = np.random.default_rng(seed)
    lift = SpectralLift()
    given = None if z_points is None else np.asarray(z_points, dtype=complex)

    def points_for(window) -> np.ndarray:
        if given is None:
            return cover.sample(window, samples, rng)
        return given[cover.contains_all(window.labels, given)]

    for a, b in cover.overlap_pairs:
        if a > b:
            continue
        points = points_for(cover.pair_window(a, b))
        if points.size == 0:
            continue
        eta = _reference(triple, a, points)
        forward, defect_forward = _induced(triple, a, b, points, eta)
        backward, defect_backward = _induced(triple, b, a, points, eta)
        lift.pairs[(a, b)] = {'points': points, 'eta': eta, 'scalars': forward}
        lift.pairs[(b, a)] = {'points': points, 'eta': eta, 'scalars': backward}
        defect = float(max(np.max(defect_forward), np.max(defect_backward)))
        lift.checks.append(IdentityCheck(f"rho[{a},{b}] preserves eigenlines", defect, defect < tolerance))
        lift.checks.append(_law(f"rho'[{a},{b}] rho'[{b},{a}] = eta", forward * backward, eta, tolerance))
        lift.checks.append(_law(f"rho'[{b},{a}] rho'[{a},{b}] = eta", backward * forward, eta, tolerance))

    twists = cover.twist_table()
    for index, component in enumerate(cover.components):
        points = points_for(component)
        if points.size == 0:
            continue
        for first, middle, last in itertools.permutations(component.labels):
            eta = _reference(triple, last, points)
            fm, _ = _induced(triple, first, middle, points, eta)
            ml, _ = _induced(triple, middle, last, points, eta)
            fl, _ = _induced(triple, first, last, points, eta)
            bit = twists[(first, middle, last, index)]
            lift.components[(index, first, middle, last)] = {'points': points, 'eta': eta, 'fm': fm, 'ml': ml,
                                                             'fl': fl}
            name = f"rho'[{first},{middle}] rho'[{middle},{last}] = rho'[{first},{last}]" + (" eta" if bit else "")
            lift.checks.append(_law(f"{name} on component {index}", fm * ml, fl * eta ** bit, tolerance))

    logger.info("Spectral lift: %d checks, %d violated", len(lift.checks), len(lift.violations))
    return lift


@dataclass
class TorsorDifference:
    """
    Ratio of two lifts of the same spectral curve, checked against the untwisted cocycle laws.

    Attributes:
        ratios (Dict[Tuple[int, int], np.ndarray]): Per-sheet ratio on each ordered overlap.
        checks (List[IdentityCheck]): T[a,b] T[b,a] = 1 and T[f,m] T[m,l] = T[f,l].
    """
    ratios: Dict[Tuple[int, int], np.ndarray]
    checks: List[IdentityCheck]

    @property
    def residual(self) -> float:
        return max((check.residual for check in self.checks), default=0.0)

    @property
    def valid(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> Dict:
        return {
            'valid': self.valid,
            'residual': self.residual,
            'checks': [{'name': c.name, 'residual': c.residual, 'passed': c.passed} for c in self.checks],
        }


def torsor_difference(lift_a: SpectralLift, lift_b: SpectralLift, tolerance: float = LAW_TOLERANCE) -> TorsorDifference:
    """
    The lifts must be taken at the same points (same seed or same z_points).

    Raises:
        SpectralError: the lifts were sampled differently.
    """
    if lift_a.pairs.keys() != lift_b.pairs.keys() or lift_a.components.keys() != lift_b.components.keys():
        raise SpectralError("Lifts cover different overlaps.")
    ratios, checks = {}, []
    for pair, data in lift_a.pairs.items():
        other = lift_b.pairs[pair]
        if data['points'].shape != other['points'].shape or not np.allclose(data['points'], other['points']):
            raise SpectralError(f"Lifts were sampled at different points on overlap {pair}.")
        ratios[pair] = data['scalars'] / other['scalars']
    for (a, b), ratio in ratios.items():
        if a < b:
            checks.append(_law(f"T[{a},{b}] T[{b},{a}] = 1", ratio * ratios[(b, a)], np.ones_like(ratio), tolerance))
    for key, data in lift_a.components.items():
        other = lift_b.components[key]
        index, first, middle, last = key
        fm, ml, fl = (data[name] / other[name] for name in ('fm', 'ml', 'fl'))
        checks.append(_law(f"T[{first},{middle}] T[{middle},{last}] = T[{first},{last}] on component {index}",
                           fm * ml, fl, tolerance))
    return TorsorDifference(ratios, checks)

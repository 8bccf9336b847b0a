import json
import logging
from typing import Dict, Union

import sympy

from .cocycle import LineCocycle
from .cover import CoverCombinatorics
from .rank_one import rank_one_solution
from .rational import RationalFunction, RationalMatrix, TripleError, gaussian
from .triple import SingularPoint, TwistedTriple, complete_transitions, picard_twist

logger = logging.getLogger(__name__)


def _complex(value) -> complex:
    return complex(sympy.N(gaussian(value)))


def _pair_key(pair) -> str:
    return f"{pair[0]},{pair[1]}"


def triple_to_dict(triple: TwistedTriple) -> Dict:
    """
    JSON document for a triple. Rational triples list every map; analytic triples are stored
    by the recipe that built them.

    Raises:
        TripleError: an analytic triple without a recipe.
    """
    singularities = [s.to_dict() for s in triple.singularities]
    if triple.descriptor is not None:
        return dict(triple.descriptor, singularities=singularities)
    if not triple.is_exact:
        raise TripleError("Only rational triples and rank-one constructions can be serialized.")
    return {
        'kind': 'exact',
        'k': triple.cover.bundle_degree,
        'base_point': [triple.cover.base_point.real, triple.cover.base_point.imag],
        'monodromy': {str(label): g.to_dict() for label, g in sorted(triple.monodromy.items())},
        'transitions': {_pair_key(pair): rho.to_dict() for pair, rho in sorted(triple.transitions.items())},
        'singularities': singularities,
    }


def triple_from_dict(data: Dict) -> TwistedTriple:
    """
    Inverse of triple_to_dict. Exact documents may give one 'G' for every patch instead of
    a 'monodromy' table, and may omit transitions that follow from the pair law.
    """
    try:
        kind = data.get('kind', 'exact')
        singularities = [SingularPoint.from_dict(s) for s in data.get('singularities', [])]
        base_point = _complex(data.get('base_point', [0, 0]))
        if kind == 'rank_one':
            triple = rank_one_solution(RationalFunction.from_dict(data['G']), int(data['k']), base_point,
                                       singularities)
            for twist in data.get('twists', []):
                triple = picard_twist(triple, LineCocycle.from_dict(twist, triple.cover))
            return triple
        if kind != 'exact':
            raise TripleError(f"Unknown triple kind {kind!r}.")
        cover = CoverCombinatorics(int(data['k']), base_point)
        if 'monodromy' in data:
            monodromy = {int(label): RationalMatrix.from_dict(g) for label, g in data['monodromy'].items()}
        else:
            single = RationalMatrix.from_dict(data['G'])
            monodromy = {label: single for label in cover.labels}
        transitions = {}
        for key, rho in data.get('transitions', {}).items():
            a, b = (int(part) for part in key.split(','))
            transitions[(a, b)] = RationalMatrix.from_dict(rho)
    except (KeyError, TypeError, ValueError) as error:
        if isinstance(error, TripleError):
            raise
        raise TripleError(f"Malformed triple document: {error!r}") from error

    return TwistedTriple(cover, monodromy, complete_transitions(cover, monodromy, transitions), singularities)


def save_document(document: Dict, path: str) -> None:
    with open(path, 'w') as handle:
        json.dump(document, handle, indent=4, sort_keys=True)


def load_document(path: str) -> Dict:
    try:
        with open(path, 'r') as handle:
            return json.load(handle)
    except FileNotFoundError as error:
        raise TripleError(f"Document not found: {path}") from error
    except json.JSONDecodeError as error:
        raise TripleError(f"Document {path} is not valid JSON: {error}") from error


def load_triple(source: Union[str, Dict]) -> TwistedTriple:
    return triple_from_dict(load_document(source) if isinstance(source, str) else source)


def load_cocycle(source: Union[str, Dict], cover: CoverCombinatorics) -> LineCocycle:
    return LineCocycle.from_dict(load_document(source) if isinstance(source, str) else source, cover)

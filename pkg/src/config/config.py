import os
import json
from typing import List, Optional, Literal, Union
from typing_extensions import Annotated

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


REPOSITORY_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))

COMMANDS = (
    'geometry-check',
    'dirac-verify',
    'degree',
    'flow',
    'triple-validate',
    'triple-rank1',
    'picard-twist',
    'shift-C',
    'spectral',
    'lift',
)


class ConfigError(ValueError):
    """
    Raised when a run configuration cannot be read or fails validation.

    Attributes:
        errors (List[str]): One "<dotted.path>: <message>" entry per problem.
    """

    def __init__(self, errors: List[str]) -> None:
        self.errors = list(errors)
        super().__init__("Invalid configuration:\n  " + "\n  ".join(self.errors))


def resolve_path(path: Optional[str]) -> Optional[str]:
    """Absolute paths and paths that exist from the working directory are kept; others are taken from the repository root."""
    if path is None or os.path.isabs(path) or os.path.exists(path):
        return path
    return os.path.join(REPOSITORY_ROOT, path)


def validate_nonincreasing(weights: List[int]) -> List[int]:
    if list(weights) != sorted(weights, reverse=True):
        raise ValueError("weights must be nonincreasing.")
    return weights


def validate_point(point: List[float]) -> List[float]:
    if len(point) != 2:
        raise ValueError("points are given as [re, im].")
    return point


class Block(BaseModel):
    model_config = ConfigDict(extra='forbid')


class GeometryBlock(Block):
    k: int = Field(default=1, ge=1, description="Degree of the circle bundle over the sphere.")
    n_z: int = Field(default=32, ge=8, description="Cells per unit length in each chart.")
    n_theta: int = Field(default=32, ge=8, description="Points along the fiber.")
    refinements: int = Field(default=1, ge=0, le=3, description="Grid halvings in convergence sweeps.")


class SingularityBlock(Block):
    chart: Literal[0, 1] = 0
    z: List[float] = Field(default=[0.0, 0.0], description="Chart coordinate of the base point as [re, im].")
    theta: float = 0.0
    weights: List[int] = Field(..., min_length=1, description="Weight vector, nonincreasing.")
    radius: float = Field(default=0.3, gt=0, description="Excision radius in geodesic units.")

    validate_weights = field_validator("weights")(validate_nonincreasing)
    validate_z = field_validator("z")(validate_point)


class ContactConnectionBlock(Block):
    kind: Literal['contact']
    constant: float = 0.5
    rank: int = Field(default=1, ge=1, le=4)


class RandomConnectionBlock(Block):
    kind: Literal['random']
    rank: int = Field(default=1, ge=1, le=4)
    scale: float = Field(default=0.5, gt=0)
    terms: int = Field(default=2, ge=1)
    max_degree: int = Field(default=2, ge=1)
    metrics: int = Field(default=0, ge=0, description="Random bundle metrics for the degree-independence check.")


ConnectionBlock = Annotated[
    Union[
        ContactConnectionBlock,
        RandomConnectionBlock,
    ],
    Field(discriminator="kind")]


class FlowBlock(Block):
    tol: float = Field(default=1e-5, gt=0)
    max_iter: int = Field(default=10000, ge=1)
    dt0: Optional[float] = Field(default=None, gt=0, description="Initial step; automatic when omitted.")
    scheme: Literal['implicit', 'explicit'] = 'implicit'
    starts: int = Field(default=1, ge=1, description="Random starting metrics.")
    constants: List[float] = Field(default=[0.0], min_length=1,
                                   description="Diagonal structure A = -i diag(C_j) alpha; its length is the rank.")
    metric_scale: float = Field(default=0.5, ge=0)
    oracle_tolerance: float = Field(default=1e-4, gt=0)


class TripleBlock(Block):
    path: Optional[str] = Field(default=None, description="JSON triple document.")
    G: Optional[str] = Field(default=None, description="Monodromy function for the rank-one constructor, e.g. 'z+5'.")
    k: int = Field(default=1, ge=1)
    base_point: List[float] = [0.0, 0.0]
    cocycle_degree: int = Field(default=1, description="Degree d of the O(d) twist.")
    cocycle_path: Optional[str] = None
    samples: int = Field(default=200, ge=1)

    validate_base_point = field_validator("base_point")(validate_point)


class ShiftBlock(Block):
    weights: List[List[int]] = Field(default=[[1]], min_length=1)
    t: List[float] = Field(default=[1.5707963267948966], min_length=1)
    volume: Optional[float] = Field(default=None, gt=0, description="Vol(X); computed from the geometry when omitted.")
    numeric: bool = Field(default=False, description="Also re-derive the shift from the bump-metric curvature.")
    numeric_tolerance: float = Field(default=0.02, gt=0)

    @model_validator(mode='after')
    def check_lengths(self) -> "ShiftBlock":
        if len(self.weights) != len(self.t):
            raise ValueError(f"{len(self.t)} shifts given for {len(self.weights)} singular points.")
        return self


class SpectralBlock(Block):
    matrix: Optional[List[List[str]]] = Field(default=None, description="Rows of rational-function entries.")
    path: Optional[str] = Field(default=None, description="JSON matrix or triple document.")
    base_points: List[List[float]] = Field(default=[[0.5, 0.5], [-0.7, 0.4]], min_length=1)
    points: int = Field(default=50, ge=1, description="Random base points for the reconstruction check.")
    samples: int = Field(default=64, ge=1, description="Samples per overlap when lifting a triple.")

    @field_validator("base_points")
    @classmethod
    def check_base_points(cls, value: List[List[float]]) -> List[List[float]]:
        for point in value:
            validate_point(point)
        return value


class RunConfig(Block):
    """
    Configuration of one run of the workbench.

    Attributes:
        command (Optional[str]): Subcommand; the command line overrides it.
        geometry (GeometryBlock): Bundle degree and grid sizes.
        singularities (List[SingularityBlock]): Dirac singular points.
        connection (Optional[ConnectionBlock]): Connection family for the degree and dirac checks.
        flow (FlowBlock): Heat-flow settings.
        triple (TripleBlock): Triple input for the triple and lift commands.
        shift (ShiftBlock): Singular-point shifts for shift-C.
        spectral (SpectralBlock): Matrix input and sampling for the spectral command.
        output_dir (str): Directory for report files.
        seed (int): Seed for every random choice.
    """
    command: Optional[Literal[COMMANDS]] = None
    geometry: GeometryBlock = GeometryBlock()
    singularities: List[SingularityBlock] = Field(default=[], max_length=8)
    connection: Optional[ConnectionBlock] = None
    flow: FlowBlock = FlowBlock()
    triple: TripleBlock = TripleBlock()
    shift: ShiftBlock = ShiftBlock()
    spectral: SpectralBlock = SpectralBlock()
    output_dir: str = 'output'
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @classmethod
    def from_dict(cls, config_data: dict) -> "RunConfig":
        """
        Class method to create an instance from a dictionary.

        Raises:
            ConfigError: the dictionary fails validation.
        """
        try:
            return cls.model_validate(config_data)
        except ValidationError as error:
            raise ConfigError([
                f"{'.'.join(str(part) for part in item['loc']) or '<root>'}: {item['msg']}"
                for item in error.errors()
            ]) from error

    @classmethod
    def from_json(cls, file_path: str = 'config.json') -> "RunConfig":
        """
        Class method to create an instance from a JSON file; relative paths are looked up from
        the working directory first and then from the repository root.
        """
        config_file_path = resolve_path(file_path)
        try:
            with open(config_file_path, 'r') as file:
                config_data = json.load(file)
        except FileNotFoundError as error:
            raise ConfigError([f"<file>: configuration file not found: {file_path}"]) from error
        except json.JSONDecodeError as error:
            raise ConfigError([f"<file>: not valid JSON: {error}"]) from error
        if not isinstance(config_data, dict):
            raise ConfigError(["<root>: configuration must be a JSON object."])
        return cls.from_dict(config_data)


def parse_config(path: str) -> RunConfig:
    return RunConfig.from_json(path)

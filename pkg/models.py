from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional

import networkx as nx
import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from errors import ContractError

RECORD_COLUMNS = ['person_id', 'phd_institution', 'phd_year', 'discipline', 'hire_institution']


@dataclass(frozen=True)
class HiringRecord:
    person_id: str
    phd_institution: str
    phd_year: int
    discipline: str
    hire_institution: str

    def __post_init__(self):
        if not self.phd_institution.strip() or not self.hire_institution.strip():
            raise ContractError('Institution names must be non-empty.')
        if self.phd_year <= 0:
            raise ContractError(f'phd_year must be a positive integer, got {self.phd_year}.')


@dataclass(frozen=True)
class NodeRegistry:
    names: tuple
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if list(self.names) != sorted(set(self.names)):
            raise ContractError('Registry names must be unique and in lexicographic order.')
        object.__setattr__(self, 'index', {name: i for i, name in enumerate(self.names)})

    @classmethod
    def from_names(cls, names: Iterable[str]):
        return cls(tuple(sorted(set(names))))

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self.index

    def id_of(self, name):
        return self.index[name]


@dataclass(frozen=True)
class NetworkFilter:
    year_range: Optional[tuple] = None  # half-open [start, end)
    disciplines: Optional[frozenset] = None
    whitelist: Optional[frozenset] = None

    def __post_init__(self):
        if self.year_range is not None:
            start, end = self.year_range
            if start >= end:
                raise ContractError(f'Year range start must be below end, got {start}:{end}.')

    def keeps(self, record: HiringRecord):
        if self.year_range is not None:
            start, end = self.year_range
            if not start <= record.phd_year < end:
                return False
        if self.disciplines is not None and record.discipline not in self.disciplines:
            return False
        if self.whitelist is not None:
            # both endpoints must be whitelisted
            if record.phd_institution not in self.whitelist or record.hire_institution not in self.whitelist:
                return False
        return True

    def apply(self, records: Iterable[HiringRecord]):
        return [record for record in records if self.keeps(record)]

    def echo(self):
        return {
            'year_range': list(self.year_range) if self.year_range is not None else None,
            'disciplines': sorted(self.disciplines) if self.disciplines is not None else None,
            'whitelist': sorted(self.whitelist) if self.whitelist is not None else None,
        }


@dataclass(frozen=True, eq=False)
class HiringNetwork:
    """Weighted directed network; edge (i, j) counts Ph.D.s produced by i and hired by j.

    Edges are held as parallel arrays sorted by (src, dst) with strictly positive
    integer weights.
    """
    registry: NodeRegistry
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        for name in ('src', 'dst', 'weight'):
            array = np.array(getattr(self, name), dtype=np.int64)
            array.flags.writeable = False
            object.__setattr__(self, name, array)

    @classmethod
    def from_weights(cls, registry: NodeRegistry, weights: Mapping):
        n = len(registry)
        items = sorted((int(i), int(j), int(w)) for (i, j), w in weights.items() if w != 0)
        for i, j, w in items:
            if w < 0:
                raise ContractError(f'Edge weights must be positive, got {w} on ({i}, {j}).')
            if not (0 <= i < n and 0 <= j < n):
                raise ContractError(f'Edge ({i}, {j}) references a node outside the registry.')
        arrays = np.array(items, dtype=np.int64).reshape(-1, 3)
        return cls(registry, arrays[:, 0].copy(), arrays[:, 1].copy(), arrays[:, 2].copy())

    @classmethod
    def from_unit_edges(cls, registry: NodeRegistry, src, dst):
        n = len(registry)
        keys = np.asarray(src, dtype=np.int64) * n + np.asarray(dst, dtype=np.int64)
        pairs, counts = np.unique(keys, return_counts=True)
        return cls(registry, pairs // n, pairs % n, counts.astype(np.int64))

    @property
    def n_nodes(self):
        return len(self.registry)

    @property
    def n_edges(self):
        return int(self.src.size)

    @cached_property
    def total_weight(self):
        return int(self.weight.sum())

    @cached_property
    def self_loop_weight(self):
        return int(self.weight[self.src == self.dst].sum())

    @property
    def non_loop_weight(self):
        return self.total_weight - self.self_loop_weight

    @cached_property
    def weights(self):
        return {(int(i), int(j)): int(w) for i, j, w in zip(self.src, self.dst, self.weight)}

    @cached_property
    def flow_matrix(self):
        # A[i, j] = m_ij - m_ji; self-loops cancel
        matrix = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        np.add.at(matrix, (self.src, self.dst), self.weight)
        flow = matrix - matrix.T
        flow.flags.writeable = False
        return flow

    def to_graph(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n_nodes))
        graph.add_weighted_edges_from(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()))
        return graph

    def edge_frame(self):
        names = np.array(self.registry.names, dtype=object)
        frame = pd.DataFrame({
            'src': names[self.src],
            'dst': names[self.dst],
            'weight': self.weight,
        })
        return frame.sort_values(['src', 'dst'], kind='stable').reset_index(drop=True)

    def __eq__(self, other):
        if not isinstance(other, HiringNetwork):
            return NotImplemented
        return self.registry == other.registry and self.weights == other.weights


@dataclass(frozen=True)
class Ranking:
    """A permutation of nodes: rank_of[i] is the 1-based rank of node i, 1 being the most prestigious."""
    rank_of: tuple
    node_at: tuple = field(init=False, compare=False)

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.rank_of)
        n = len(ranks)
        if sorted(ranks) != list(range(1, n + 1)):
            raise ContractError('rank_of must be a bijection onto 1..N.')
        node_at = [0] * n
        for node, rank in enumerate(ranks):
            node_at[rank - 1] = node
        object.__setattr__(self, 'rank_of', ranks)
        object.__setattr__(self, 'node_at', tuple(node_at))

    @classmethod
    def from_order(cls, node_at: Iterable[int]):
        order = [int(node) for node in node_at]
        rank_of = [0] * len(order)
        for position, node in enumerate(order):
            if not 0 <= node < len(order):
                raise ContractError(f'Node {node} is outside 0..{len(order) - 1}.')
            rank_of[node] = position + 1
        return cls(tuple(rank_of))

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(1, n + 1)))

    def reversed(self):
        n = len(self.rank_of)
        return Ranking(tuple(n + 1 - r for r in self.rank_of))

    def positions(self):
        return np.asarray(self.rank_of, dtype=np.int64)

    def __len__(self):
        return len(self.rank_of)


@dataclass(frozen=True)
class SamplerConfig:
    total_iterations: int = 100_000
    burn_in: int = 20_000
    sample_interval: int = 100
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ('total_iterations', 'burn_in', 'sample_interval', 'restarts'):
            if getattr(self, name) < 1:
                raise ContractError(f'{name} must be a positive integer.')
        if self.burn_in >= self.total_iterations:
            raise ContractError('burn_in must be smaller than total_iterations.')
        if self.burn_in + self.sample_interval > self.total_iterations:
            raise ContractError('burn_in + sample_interval must not exceed total_iterations.')
        if not 0 <= self.seed < 2 ** 64:
            raise ContractError('seed must be a 64-bit unsigned integer.')

    def echo(self):
        return asdict(self)


@dataclass(eq=False)
class ChainResult:
    sample_ranks: np.ndarray  # (k, N) rank_of rows
    sample_scores: np.ndarray
    best_score: int
    best_rho: float
    score_trace: Optional[list] = None


@dataclass(eq=False)
class MvrResult:
    sample_ranks: np.ndarray  # retained samples only, all at best_score
    best_rho: float
    best_score: int
    prestige_score: np.ndarray
    ci95: np.ndarray  # (N, 2) low/high
    consensus: Ranking

    @property
    def samples(self):
        return [Ranking(tuple(row)) for row in self.sample_ranks.tolist()]


@dataclass(frozen=True)
class RhoDistribution:
    values: tuple
    mean: float = field(init=False)
    std: float = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, 'values', tuple(values.tolist()))
        object.__setattr__(self, 'n', int(values.size))
        object.__setattr__(self, 'mean', float(values.mean()) if values.size else float('nan'))
        object.__setattr__(self, 'std', float(values.std(ddof=1)) if values.size >= 2 else float('nan'))

    def summary(self):
        return {'mean': self.mean, 'std': self.std, 'n': self.n}


@dataclass(frozen=True)
class SignificanceReport:
    t_statistic: float
    p_value_t: float
    p_value_empirical: float
    empirical_mean: float
    null_mean: float
    degenerate: bool = False


@dataclass(frozen=True)
class LorenzCurve:
    points: tuple  # ((cum_population_fraction, cum_production_fraction), ...)

    def area(self):
        xs, ys = zip(*self.points)
        return float(trapezoid(ys, xs))

    def gini(self):
        return 1.0 - 2.0 * self.area()


@dataclass(eq=False)
class RankChangeSample:
    values: tuple
    n_total: int
    n_up: int
    n_dropped: int = 0
    table: Optional[pd.DataFrame] = field(default=None, repr=False)


@dataclass(frozen=True)
class PlantedConfig:
    n_nodes: int
    n_edges: int
    p_down: float
    producer_skew: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ContractError('n_nodes must be at least 2.')
        if self.n_edges < 1:
            raise ContractError('n_edges must be at least 1.')
        if not 0.5 <= self.p_down <= 1.0:
            raise ContractError(f'p_down must lie in [0.5, 1], got {self.p_down}.')
        if self.producer_skew < 0:
            raise ContractError('producer_skew must be non-negative.')
        if not 0 <= self.seed < 2 ** 64:
            raise ContractError('seed must be a 64-bit unsigned integer.')


@dataclass
class RunManifest:
    command: str
    argv: list
    inputs: list
    tool_version: str
    seed: Optional[int] = None
    filter: Optional[dict] = None
    sampler: Optional[dict] = None
    outputs: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

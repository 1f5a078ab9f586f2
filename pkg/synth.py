import logging

import numpy as np
import pandas as pd

from errors import ContractError
from models import HiringNetwork, HiringRecord, NodeRegistry, PlantedConfig, Ranking

log = logging.getLogger(__name__)


def planted_names(n_nodes):
    width = max(4, len(str(n_nodes)))
    return tuple(f'inst_{k:0{width}d}' for k in range(1, n_nodes + 1))


def _producer_weights(propensity):
    return propensity / propensity.sum()


def generate_planted(cfg: PlantedConfig):
    """Sample a network whose edges point down the identity ranking with probability p_down.

    The direction is drawn first; the producer is then drawn with probability
    proportional to rank**(-producer_skew) among nodes that have a node on that
    side (the bottom node can only place upward, the top node only downward),
    and the employer uniformly among the nodes on that side. No self-hires.
    """
    n, e = cfg.n_nodes, cfg.n_edges
    rng = np.random.default_rng(cfg.seed)
    registry = NodeRegistry(planted_names(n))
    propensity = np.arange(1, n + 1, dtype=float) ** (-cfg.producer_skew)

    down = rng.random(e) < cfg.p_down
    n_down = int(down.sum())
    producers = np.empty(e, dtype=np.int64)
    producers[down] = rng.choice(n - 1, size=n_down, p=_producer_weights(propensity[:-1]))
    producers[~down] = 1 + rng.choice(n - 1, size=e - n_down, p=_producer_weights(propensity[1:]))

    offsets = rng.random(e)
    below = producers + 1 + np.floor(offsets * (n - 1 - producers)).astype(np.int64)
    above = np.floor(offsets * producers).astype(np.int64)
    employers = np.where(down, below, above)

    net = HiringNetwork.from_unit_edges(registry, producers, employers)
    log.info('Planted network: %d institutions, %d placements, %d downward', n, e, n_down)
    return net, Ranking.identity(n)


def planted_records(net: HiringNetwork, year_range, discipline, seed):
    """One person-level record per placement with a doctoral year drawn uniformly from [start, end)."""
    start, end = year_range
    if start >= end:
        raise ContractError(f'Year range start must be below end, got {start}:{end}.')
    src = np.repeat(net.src, net.weight)
    dst = np.repeat(net.dst, net.weight)
    years = np.random.default_rng(seed).integers(start, end, size=src.size)
    names = net.registry.names
    return [
        HiringRecord(f'p{k:06d}', names[i], int(year), discipline, names[j])
        for k, (i, j, year) in enumerate(zip(src.tolist(), dst.tolist(), years.tolist()), start=1)
    ]


def write_truth(registry: NodeRegistry, ranking: Ranking, path):
    frame = pd.DataFrame({
        'institution': [registry.names[i] for i in ranking.node_at],
        'true_rank': np.arange(1, len(ranking) + 1),
    })
    frame.to_csv(path, index=False, lineterminator='\n')

"""Inequality of faculty production and mobility relative to a prestige ranking."""
import logging

import numpy as np
import pandas as pd
from scipy import special

from errors import ContractError, UndefinedGiniError
from models import HiringNetwork, LorenzCurve, NodeRegistry, RankChangeSample, Ranking
from network import degree_sequences, records_frame

log = logging.getLogger(__name__)


def _production_array(production):
    x = np.asarray(production, dtype=float)
    if x.size == 0:
        raise ContractError('Production sequence is empty.')
    if np.any(x < 0):
        raise ContractError('Production values must be non-negative.')
    if x.sum() <= 0:
        raise UndefinedGiniError('Gini is undefined when every production value is zero.')
    return np.sort(x)


def gini(production):
    """Population Gini: sum_ij |x_i - x_j| / (2 n^2 mean), computed from the sorted values."""
    x = _production_array(production)
    n = x.size
    coefficients = 2 * np.arange(1, n + 1) - n - 1
    return float(np.sum(coefficients * x) / (n * x.sum()))


def lorenz(production):
    x = _production_array(production)
    n = x.size
    cumulative = np.cumsum(x)
    ys = np.concatenate([[0.0], cumulative / cumulative[-1]])
    xs = np.arange(n + 1) / n
    return LorenzCurve(tuple(zip(xs.tolist(), ys.tolist())))


def faculty_production(net: HiringNetwork):
    out_degree, _ = degree_sequences(net)
    return out_degree


def production_table(net: HiringNetwork):
    produced = faculty_production(net)
    frame = pd.DataFrame({
        'institution': list(net.registry.names),
        'production': produced,
        'share': produced / net.total_weight,
    })
    return frame.sort_values(['production', 'institution'], ascending=[False, True], kind='stable').reset_index(drop=True)


def yearly_counts(records):
    counts = records_frame(records).groupby('phd_year').size()
    return pd.DataFrame({'year': counts.index.astype(int), 'count': counts.to_numpy()})


def relative_rank_change(records, consensus: Ranking, registry: NodeRegistry):
    """(rank of employer - rank of doctoral institution) / N per record.

    Positive values move down the hierarchy. Records naming an institution
    outside the ranking are dropped and counted in ``n_dropped``.
    """
    n = len(registry)
    if len(consensus) != n:
        raise ContractError(f'Ranking covers {len(consensus)} nodes but the registry has {n}.')

    rows, dropped = [], 0
    for record in records:
        if record.phd_institution not in registry or record.hire_institution not in registry:
            dropped += 1
            continue
        phd_rank = consensus.rank_of[registry.id_of(record.phd_institution)]
        hire_rank = consensus.rank_of[registry.id_of(record.hire_institution)]
        rows.append((record.person_id, phd_rank, hire_rank, (hire_rank - phd_rank) / n))
    if not rows:
        raise ContractError('No record references two ranked institutions.')
    if dropped:
        log.info('Dropped %d records referencing unranked institutions', dropped)

    table = pd.DataFrame(rows, columns=['person_id', 'phd_rank', 'hire_rank', 'relative_change'])
    values = table['relative_change'].to_numpy()
    return RankChangeSample(
        values=tuple(values.tolist()),
        n_total=len(rows),
        n_up=int(np.sum(values < 0)),
        n_dropped=dropped,
        table=table,
    )


def upward_fraction(sample: RankChangeSample):
    if sample.n_total < 1:
        raise ContractError('Upward fraction needs at least one record.')
    return sample.n_up / sample.n_total


def mean_rank_change(sample: RankChangeSample):
    if sample.n_total < 1:
        raise ContractError('Mean rank change needs at least one record.')
    return float(np.mean(sample.values))


def ks_two_sample(a, b):
    """Two-sided two-sample KS statistic with the asymptotic Kolmogorov p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ContractError('KS test needs two non-empty samples.')
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side='right') / a.size
    cdf_b = np.searchsorted(b, grid, side='right') / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    effective = a.size * b.size / (a.size + b.size)
    p = float(np.clip(special.kolmogorov(np.sqrt(effective) * d), 0.0, 1.0))
    return d, p


def write_lorenz(curve: LorenzCurve, path):
    frame = pd.DataFrame(list(curve.points), columns=['cum_institutions', 'cum_production'])
    frame.to_csv(path, index=False, float_format='%.4f', lineterminator='\n')


def write_rank_changes(sample: RankChangeSample, path):
    sample.table.to_csv(path, index=False, float_format='%.4f', lineterminator='\n')

import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd
from scipy import stats

from errors import ContractError, DegenerateTestError, UndefinedRhoError
from models import HiringNetwork, RhoDistribution, SamplerConfig, SignificanceReport
from mvr import sample_mvr
from workers import parallel_map

log = logging.getLogger(__name__)

SWAPS_PER_EDGE = 20
MAX_REDRAWS = 100


def unit_edges(net: HiringNetwork):
    """Expand weights into one (src, dst) entry per placement."""
    return np.repeat(net.src, net.weight), np.repeat(net.dst, net.weight)


def degree_preserving_rewire(net: HiringNetwork, n_swaps, seed):
    """Randomize placements with double-edge swaps; every node keeps its in- and out-degree.

    Swaps are applied unconditionally, so multi-edges and self-hires may appear.
    """
    src, dst = unit_edges(net)
    n_units = int(src.size)
    if n_units < 2:
        raise ContractError('Rewiring needs at least 2 placements.')
    if n_swaps < 0:
        raise ContractError('n_swaps must be non-negative.')

    rng = np.random.default_rng(seed)
    first = rng.integers(0, n_units, size=n_swaps)
    second = ((first + rng.integers(1, n_units, size=n_swaps)) % n_units).tolist()
    targets = dst.tolist()
    for k, l in zip(first.tolist(), second):
        # (a->b), (c->d) become (a->d), (c->b)
        targets[k], targets[l] = targets[l], targets[k]
    return HiringNetwork.from_unit_edges(net.registry, src, targets)


def _replicate_seeds(seed, replicate, attempt):
    state = np.random.SeedSequence([seed, replicate, attempt]).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def _bootstrap_replicate(task):
    net, sampler, seed, replicate = task
    src, dst = unit_edges(net)
    for attempt in range(MAX_REDRAWS + 1):
        draw_seed, sampler_seed = _replicate_seeds(seed, replicate, attempt)
        picks = np.random.default_rng(draw_seed).integers(0, src.size, size=src.size)
        sample = HiringNetwork.from_unit_edges(net.registry, src[picks], dst[picks])
        if sample.non_loop_weight > 0:
            return sample_mvr(sample, replace(sampler, seed=sampler_seed)).best_rho
        log.info('Bootstrap replicate %d drew only self-hires; redrawing', replicate)
    raise UndefinedRhoError(f'bootstrap replicate {replicate} drew only self-hires after {MAX_REDRAWS} redraws')


def _null_replicate(task):
    net, sampler, seed, replicate = task
    n_swaps = SWAPS_PER_EDGE * net.total_weight
    for attempt in range(MAX_REDRAWS + 1):
        rewire_seed, sampler_seed = _replicate_seeds(seed, replicate, attempt)
        rewired = degree_preserving_rewire(net, n_swaps, rewire_seed)
        if rewired.non_loop_weight > 0:
            return sample_mvr(rewired, replace(sampler, seed=sampler_seed)).best_rho
        log.info('Null replicate %d rewired into self-hires only; redrawing', replicate)
    raise UndefinedRhoError(f'null replicate {replicate} produced only self-hires after {MAX_REDRAWS} redraws')


def _check_replicates(replicates):
    if replicates < 2:
        raise ContractError(f'At least 2 replicates are required, got {replicates}.')


def bootstrap_rho(net: HiringNetwork, replicates, sampler: SamplerConfig, seed, workers=1):
    """rho of MVRs over networks resampled placement-by-placement with replacement."""
    _check_replicates(replicates)
    if net.non_loop_weight == 0:
        raise UndefinedRhoError('rho is undefined: every placement is a self-hire')
    tasks = [(net, sampler, seed, r) for r in range(replicates)]
    return RhoDistribution(tuple(parallel_map(_bootstrap_replicate, tasks, workers)))


def null_rho_distribution(net: HiringNetwork, replicates, sampler: SamplerConfig, seed, workers=1):
    """rho of MVRs over degree-preserving randomizations of the network."""
    _check_replicates(replicates)
    if net.total_weight < 2:
        raise ContractError('Rewiring needs at least 2 placements.')
    tasks = [(net, sampler, seed, r) for r in range(replicates)]
    return RhoDistribution(tuple(parallel_map(_null_replicate, tasks, workers)))


def empirical_p_value(empirical: RhoDistribution, null: RhoDistribution):
    """(1 + #{null >= min(empirical)}) / (B_null + 1)."""
    exceed = int(np.sum(np.asarray(null.values) >= min(empirical.values)))
    return (1 + exceed) / (null.n + 1)


def significance(empirical: RhoDistribution, null: RhoDistribution):
    """One-sided Welch t-test (empirical > null) plus an empirical exceedance p-value."""
    if empirical.n < 2 or null.n < 2:
        raise ContractError('Both distributions need at least 2 values.')
    emp = np.asarray(empirical.values)
    nul = np.asarray(null.values)
    diff = empirical.mean - null.mean

    if emp.var(ddof=1) == 0 and nul.var(ddof=1) == 0:
        if diff == 0:
            raise DegenerateTestError('degenerate test: both distributions are constant and equal')
        t_statistic = math.copysign(math.inf, diff)
        p_value_t = 0.0 if diff > 0 else 1.0
    else:
        result = stats.ttest_ind(emp, nul, equal_var=False, alternative='greater')
        t_statistic, p_value_t = float(result.statistic), float(result.pvalue)

    return SignificanceReport(
        t_statistic=t_statistic,
        p_value_t=p_value_t,
        p_value_empirical=empirical_p_value(empirical, null),
        empirical_mean=empirical.mean,
        null_mean=null.mean,
    )


def degenerate_report(empirical: RhoDistribution, null: RhoDistribution):
    """Report for identical constant distributions: no t-test, only the exceedance p-value."""
    return SignificanceReport(
        t_statistic=math.nan,
        p_value_t=math.nan,
        p_value_empirical=empirical_p_value(empirical, null),
        empirical_mean=empirical.mean,
        null_mean=null.mean,
        degenerate=True,
    )


def write_distribution(dist: RhoDistribution, path):
    frame = pd.DataFrame({'replicate': np.arange(dist.n), 'rho': dist.values})
    frame.to_csv(path, index=False, float_format='%.4f', lineterminator='\n')

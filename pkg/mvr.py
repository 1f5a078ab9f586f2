import logging

import numpy as np
import pandas as pd

from errors import ContractError, InputFormatError, SizeLimitError, UndefinedRhoError
from models import ChainResult, HiringNetwork, MvrResult, NodeRegistry, Ranking, SamplerConfig
from network import degree_sequences
from workers import parallel_map

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10
SEED_MODULUS = 2 ** 64
RANKING_COLUMNS = ['rank', 'institution', 'prestige_score', 'ci_low', 'ci_high']


def _check_covers(net: HiringNetwork, ranking: Ranking):
    if len(ranking) != net.n_nodes:
        raise ContractError(f'Ranking covers {len(ranking)} nodes but the network has {net.n_nodes}.')


def _check_rankable(net: HiringNetwork):
    if net.n_nodes < 2:
        raise ContractError('Ranking needs at least 2 institutions.')
    if net.non_loop_weight == 0:
        raise ContractError('Ranking needs at least one placement between distinct institutions.')


def _direction_weights(net, ranking):
    positions = ranking.positions()
    src_rank, dst_rank = positions[net.src], positions[net.dst]
    down = int(net.weight[src_rank < dst_rank].sum())
    up = int(net.weight[src_rank > dst_rank].sum())
    return down, up


def net_score(net: HiringNetwork, ranking: Ranking):
    """S = sum of m_ij * sign(rank(j) - rank(i)); self-loops contribute nothing."""
    _check_covers(net, ranking)
    down, up = _direction_weights(net, ranking)
    return down - up


def rho(net: HiringNetwork, ranking: Ranking):
    """Fraction of non-self-loop placement weight pointing down the ranking."""
    _check_covers(net, ranking)
    down, up = _direction_weights(net, ranking)
    if down + up == 0:
        raise UndefinedRhoError('rho is undefined: every placement is a self-hire')
    return down / (down + up)


def rho_from_score(net: HiringNetwork, score):
    total = net.non_loop_weight
    if total == 0:
        raise UndefinedRhoError('rho is undefined: every placement is a self-hire')
    # S = W_down - W_up and W_down + W_up = total
    return (total + score) / (2 * total)


def _swap_delta(flow, rank_pos, node_at, a, b):
    pa, pb = rank_pos[a], rank_pos[b]
    if pa > pb:
        a, b, pa, pb = b, a, pb, pa
    # only pairs involving a or b with a node ranked between them change orientation
    between = node_at[pa + 1:pb]
    return -2 * int(flow[a, b] + flow[a, between].sum() - flow[b, between].sum())


def delta_swap(net: HiringNetwork, ranking: Ranking, a, b):
    if a == b:
        raise ContractError('delta_swap needs two distinct nodes.')
    _check_covers(net, ranking)
    rank_pos = [r - 1 for r in ranking.rank_of]
    node_at = np.asarray(ranking.node_at, dtype=np.int64)
    return _swap_delta(net.flow_matrix, rank_pos, node_at, a, b)


def initial_ranking(net: HiringNetwork):
    out_degree, _ = degree_sequences(net)
    order = np.lexsort((np.arange(net.n_nodes), -out_degree))
    return Ranking.from_order(order)


def run_chain(net: HiringNetwork, cfg: SamplerConfig, chain_seed, record_trace=False):
    """Zero-temperature Metropolis-Hastings over rankings.

    Every iteration proposes exchanging the ranks of a uniformly drawn pair of
    distinct nodes and accepts it iff the score does not decrease. After
    ``burn_in`` iterations the current ranking is recorded every
    ``sample_interval`` iterations.
    """
    _check_rankable(net)
    n = net.n_nodes
    flow = net.flow_matrix
    rng = np.random.default_rng(chain_seed)

    start = initial_ranking(net)
    node_at = np.asarray(start.node_at, dtype=np.int64)
    rank_pos = [r - 1 for r in start.rank_of]
    score = net_score(net, start)

    first = rng.integers(0, n, size=cfg.total_iterations)
    second = ((first + rng.integers(1, n, size=cfg.total_iterations)) % n).tolist()
    first = first.tolist()

    trace = [score] if record_trace else None
    ranks, scores = [], []
    for step in range(cfg.total_iterations):
        a, b = first[step], second[step]
        delta = _swap_delta(flow, rank_pos, node_at, a, b)
        if delta >= 0:
            pa, pb = rank_pos[a], rank_pos[b]
            rank_pos[a], rank_pos[b] = pb, pa
            node_at[pa], node_at[pb] = b, a
            score += delta
            if trace is not None:
                trace.append(score)

        done = step + 1
        if done > cfg.burn_in and (done - cfg.burn_in) % cfg.sample_interval == 0:
            ranks.append([p + 1 for p in rank_pos])
            scores.append(score)

    sample_scores = np.asarray(scores, dtype=np.int64)
    best_score = int(sample_scores.max())
    log.debug('Chain seed %d: %d samples, best score %d', chain_seed, len(scores), best_score)
    return ChainResult(
        sample_ranks=np.asarray(ranks, dtype=np.int64).reshape(-1, n),
        sample_scores=sample_scores,
        best_score=best_score,
        best_rho=rho_from_score(net, best_score),
        score_trace=trace,
    )


def _run_chain_task(task):
    net, cfg, chain_seed = task
    return run_chain(net, cfg, chain_seed)


def sample_mvr(net: HiringNetwork, cfg: SamplerConfig, workers=1):
    """Pool ``cfg.restarts`` chains and form consensus prestige scores from the best samples."""
    _check_rankable(net)
    tasks = [(net, cfg, (cfg.seed + k) % SEED_MODULUS) for k in range(cfg.restarts)]
    chains = parallel_map(_run_chain_task, tasks, workers)

    ranks = np.vstack([chain.sample_ranks for chain in chains])
    scores = np.concatenate([chain.sample_scores for chain in chains])
    best_score = int(scores.max())
    kept = ranks[scores == best_score]

    prestige = kept.mean(axis=0)
    ci95 = np.percentile(kept, [2.5, 97.5], axis=0).T
    out_degree, _ = degree_sequences(net)
    # ties: descending out-degree, then ascending id
    order = np.lexsort((np.arange(net.n_nodes), -out_degree, prestige))

    result = MvrResult(
        sample_ranks=kept,
        best_rho=rho_from_score(net, best_score),
        best_score=best_score,
        prestige_score=prestige,
        ci95=ci95,
        consensus=Ranking.from_order(order),
    )
    log.info('Sampled %d rankings over %d chains; kept %d at S=%d (rho=%.4f)',
             len(scores), cfg.restarts, len(kept), best_score, result.best_rho)
    return result


def brute_force_mvr(net: HiringNetwork):
    """Exact optimum by exhausting all orderings; returns (score, rho, optimal rankings).

    Orderings are explored through their top-placed subsets, so every optimal
    permutation is found without visiting all N! of them one by one.
    """
    n = net.n_nodes
    if n > BRUTE_FORCE_LIMIT:
        raise SizeLimitError(f'exhaustive MVR supports at most {BRUTE_FORCE_LIMIT} institutions, got {n}')
    flow = net.flow_matrix.tolist()
    size = 1 << n

    # gain[mask][v]: score added by placing v directly below the nodes in mask
    gain = [[0] * n for _ in range(size)]
    for mask in range(1, size):
        low = (mask & -mask).bit_length() - 1
        prev, row = gain[mask ^ (1 << low)], flow[low]
        gain[mask] = [prev[v] + row[v] for v in range(n)]

    best = [0] * size
    for mask in range(1, size):
        best[mask] = max(best[mask ^ (1 << v)] + gain[mask ^ (1 << v)][v] for v in range(n) if mask >> v & 1)

    optima = []
    stack = [(size - 1, [])]
    while stack:
        mask, below = stack.pop()
        if mask == 0:
            optima.append(tuple(below))
            continue
        for v in range(n):
            if mask >> v & 1:
                rest = mask ^ (1 << v)
                if best[rest] + gain[rest][v] == best[mask]:
                    stack.append((rest, [v] + below))

    optimal_score = best[size - 1]
    rankings = [Ranking.from_order(order) for order in sorted(optima)]
    return optimal_score, rho_from_score(net, optimal_score), rankings


def ranking_frame(result: MvrResult, registry: NodeRegistry):
    order = np.asarray(result.consensus.node_at, dtype=np.int64)
    return pd.DataFrame({
        'rank': np.arange(1, len(order) + 1),
        'institution': [registry.names[i] for i in order],
        'prestige_score': result.prestige_score[order],
        'ci_low': result.ci95[order, 0],
        'ci_high': result.ci95[order, 1],
    })


def write_ranking(result: MvrResult, registry: NodeRegistry, path):
    ranking_frame(result, registry).to_csv(path, index=False, float_format='%.4f', lineterminator='\n')


def load_ranking(path):
    """Read a consensus ranking CSV back as (registry, ranking)."""
    try:
        frame = pd.read_csv(path, dtype={'institution': str}, keep_default_na=False, encoding='utf-8-sig')
    except pd.errors.EmptyDataError:
        raise InputFormatError(f'Ranking file {path} is empty') from None
    except pd.errors.ParserError as e:
        raise InputFormatError(f'Ranking file {path} is not valid CSV: {e}') from None
    missing = [column for column in ('rank', 'institution') if column not in frame.columns]
    if missing:
        raise InputFormatError(f'Ranking file is missing column(s): {", ".join(missing)}')
    frame = frame.sort_values('rank', kind='stable')
    if frame['rank'].tolist() != list(range(1, len(frame) + 1)):
        raise InputFormatError('Ranking ranks must run 1..N without gaps.')
    names = [name.strip() for name in frame['institution']]
    if len(set(names)) != len(names):
        raise InputFormatError('Ranking lists an institution more than once.')

    registry = NodeRegistry.from_names(names)
    rank_of = [0] * len(names)
    for rank, name in enumerate(names, start=1):
        rank_of[registry.id_of(name)] = rank
    return registry, Ranking(tuple(rank_of))

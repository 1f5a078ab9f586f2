import json
import logging.config
import math
import os
from dataclasses import asdict
from functools import wraps
from itertools import combinations
from pathlib import Path

import click
from flask import Flask, current_app
from flask.cli import FlaskGroup
from wtforms.validators import ValidationError

from errors import DegenerateTestError, HierarchyError, InputFormatError
from forms import FilterForm, PlantedForm, ReplicateForm, SamplerForm, bind_form, form_errors, parse_interval
from metrics import (
    faculty_production,
    gini,
    ks_two_sample,
    lorenz,
    mean_rank_change,
    production_table,
    relative_rank_change,
    upward_fraction,
    write_lorenz,
    write_rank_changes,
    yearly_counts,
)
from models import NetworkFilter, RunManifest
from mvr import brute_force_mvr, load_ranking, ranking_frame, sample_mvr, write_ranking
from network import build_network, load_edge_list, load_whitelist, read_records, write_edge_list, write_records
from null_model import bootstrap_rho, degenerate_report, null_rho_distribution, significance, write_distribution
from synth import generate_planted, planted_records, write_truth

TOOL_VERSION = '1.0.0'


def _env_threads():
    value = os.environ.get('HIERARCHYRANK_THREADS')
    try:
        threads = int(value) if value else (os.cpu_count() or 1)
    except ValueError:
        threads = 1
    return max(threads, 1)


# --- CONFIGURATION ---
class Config:
    THREADS = 1
    LOG_LEVEL = 'WARNING'
    TOOL_VERSION = TOOL_VERSION

    @classmethod
    def from_env(cls):
        return {
            'THREADS': _env_threads(),
            'LOG_LEVEL': os.environ.get('HIERARCHYRANK_LOG_LEVEL') or cls.LOG_LEVEL,
        }


def configure_logging(level):
    logging.config.dictConfig({
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {'default': {
            'format': '[%(asctime)s] %(levelname)s in %(module)s: %(message)s',
        }},
        'handlers': {'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'default',
        }},
        'root': {'level': level, 'handlers': ['stderr']},
    })


def create_app(test_config=None):
    app = Flask(__name__)
    app.config.from_object(Config)
    app.config.update(Config.from_env())
    if test_config:
        app.config.update(test_config)
    configure_logging(app.config['LOG_LEVEL'])
    return app


cli = FlaskGroup(
    create_app=create_app,
    add_default_commands=False,
    load_dotenv=False,
    help='Prestige hierarchies in hiring networks from Minimum Violation Rankings.',
)


# --- HELPERS ---
def reports_errors(f):
    """Map domain errors onto click exit codes: 2 for bad input, 1 for computation errors."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (InputFormatError, ValidationError) as e:
            raise click.UsageError(str(e)) from e
        except HierarchyError as e:
            raise click.ClickException(str(e)) from e
    return decorated_function


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def write_json(payload, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        json.dump(_json_safe(payload), handle, sort_keys=True, indent=2, allow_nan=False)
        handle.write('\n')


def _command_names(ctx):
    names = []
    while ctx.parent is not None:
        names.append(ctx.info_name)
        ctx = ctx.parent
    return list(reversed(names))


def _command_argv(ctx):
    """Rebuild the argument vector of the running command from its parsed parameters."""
    argv = _command_names(ctx)
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if value is None or value is False or value == ():
            continue
        if isinstance(param, click.Argument):
            argv.append(str(value))
        elif param.is_flag:
            argv.append(param.opts[0])
        else:
            for item in (value if param.multiple else (value,)):
                argv.extend([param.opts[0], str(item)])
    return argv


def _output_dir(path):
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_manifest(output_dir, inputs, outputs, seed=None, network_filter=None, sampler=None):
    ctx = click.get_current_context()
    manifest = RunManifest(
        command=' '.join(_command_names(ctx)),
        argv=_command_argv(ctx),
        inputs=[str(path) for path in inputs if path],
        tool_version=current_app.config['TOOL_VERSION'],
        seed=seed,
        filter=network_filter.echo() if network_filter is not None else None,
        sampler=sampler.echo() if sampler is not None else None,
        outputs=[str(path) for path in outputs],
    )
    write_json(manifest.to_dict(), output_dir / 'manifest.json')


def _validated(form):
    if not form.validate():
        raise click.UsageError(form_errors(form))
    return form


def _network_filter(years, disciplines, whitelist):
    form = _validated(bind_form(FilterForm, {'years': years}))
    return form.to_filter(disciplines, load_whitelist(whitelist) if whitelist else None)


def _load_network(records, edges, network_filter):
    if bool(records) == bool(edges):
        raise click.UsageError('Give exactly one of a records CSV or --edges FILE.')
    if edges:
        if network_filter != NetworkFilter():
            raise click.UsageError('--years, --discipline and --whitelist apply to records input only.')
        return load_edge_list(edges)
    return build_network(read_records(records), network_filter)


def _sampler_overrides(iters, burnin, interval, restarts, seed):
    return {
        'total_iterations': iters,
        'burn_in': burnin,
        'sample_interval': interval,
        'restarts': restarts,
        'seed': seed,
    }


def filter_options(f):
    f = click.option('--whitelist', type=click.Path(exists=True, dir_okay=False),
                     help='File of institution names to keep, one per line.')(f)
    f = click.option('--discipline', 'disciplines', multiple=True, help='Keep only this discipline (repeatable).')(f)
    f = click.option('--years', help='Half-open doctoral year range A:B.')(f)
    return f


def sampler_options(f):
    f = click.option('--seed', type=int, help='Base seed (default 0).')(f)
    f = click.option('--restarts', type=int, help='Independent chains (default 10).')(f)
    f = click.option('--interval', type=int, help='Iterations between samples (default 100).')(f)
    f = click.option('--burnin', type=int, help='Iterations discarded before sampling (default 20000).')(f)
    f = click.option('--iters', type=int, help='Iterations per chain (default 100000).')(f)
    f = click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help='key=value file of sampler parameters; flags take precedence.')(f)
    return f


def output_option(f):
    return click.option('--output-dir', default='.', show_default=True, type=click.Path(file_okay=False),
                        help='Directory receiving every output file.')(f)


# --- RANKING ---
@cli.command('rank')
@click.argument('records', required=False, type=click.Path(exists=True, dir_okay=False))
@click.option('--edges', type=click.Path(exists=True, dir_okay=False), help='Edge-list CSV instead of records.')
@filter_options
@sampler_options
@click.option('--top', type=click.IntRange(min=0), default=10, show_default=True,
              help='Institutions echoed to the terminal; the file always holds all of them.')
@output_option
@reports_errors
def rank(records, edges, years, disciplines, whitelist, config_path, iters, burnin, interval, restarts, seed,
         top, output_dir):
    """Sample Minimum Violation Rankings and write the consensus ranking."""
    network_filter = _network_filter(years, disciplines, whitelist)
    form = _validated(bind_form(SamplerForm, _sampler_overrides(iters, burnin, interval, restarts, seed),
                                config_path))
    sampler = form.to_config()
    net = _load_network(records, edges, network_filter)

    current_app.logger.info('Ranking %d institutions with %d chains', net.n_nodes, sampler.restarts)
    result = sample_mvr(net, sampler, workers=current_app.config['THREADS'])

    out = _output_dir(output_dir)
    ranking_path, report_path = out / 'ranking.csv', out / 'rank_report.json'
    write_ranking(result, net.registry, ranking_path)
    write_json({
        'n_nodes': net.n_nodes,
        'n_edges': net.n_edges,
        'total_weight': net.total_weight,
        'best_rho': result.best_rho,
        'best_score': result.best_score,
    }, report_path)
    write_manifest(out, [records or edges, config_path, whitelist], [ranking_path, report_path],
                   seed=sampler.seed, network_filter=network_filter, sampler=sampler)

    click.echo(f'best rho {result.best_rho:.4f} (S = {result.best_score})')
    for row in ranking_frame(result, net.registry).head(top).itertuples(index=False):
        click.echo(f'{row.rank:>5}  {row.prestige_score:>9.4f}  {row.institution}')


# --- NULL MODEL ---
@cli.command('null')
@click.argument('records', required=False, type=click.Path(exists=True, dir_okay=False))
@click.option('--edges', type=click.Path(exists=True, dir_okay=False), help='Edge-list CSV instead of records.')
@filter_options
@click.option('--replicates', type=int, help='Bootstrap and null replicates each (default 100).')
@sampler_options
@output_option
@reports_errors
def null(records, edges, years, disciplines, whitelist, replicates, config_path, iters, burnin, interval,
         restarts, seed, output_dir):
    """Compare bootstrap rho against a degree-preserving null model."""
    network_filter = _network_filter(years, disciplines, whitelist)
    overrides = _sampler_overrides(iters, burnin, interval, restarts, seed)
    overrides['replicates'] = replicates
    form = _validated(bind_form(ReplicateForm, overrides, config_path))
    sampler, count = form.to_config(), form.replicates.data
    net = _load_network(records, edges, network_filter)

    workers = current_app.config['THREADS']
    current_app.logger.info('Drawing %d bootstrap and %d null replicates', count, count)
    empirical = bootstrap_rho(net, count, sampler, sampler.seed, workers=workers)
    null_dist = null_rho_distribution(net, count, sampler, sampler.seed, workers=workers)
    try:
        report = significance(empirical, null_dist)
    except DegenerateTestError as e:
        current_app.logger.warning('%s', e)
        report = degenerate_report(empirical, null_dist)

    out = _output_dir(output_dir)
    empirical_path, null_path, report_path = out / 'rho_empirical.csv', out / 'rho_null.csv', out / 'significance.json'
    write_distribution(empirical, empirical_path)
    write_distribution(null_dist, null_path)
    payload = asdict(report)
    payload.update(empirical=empirical.summary(), null=null_dist.summary())
    write_json(payload, report_path)
    write_manifest(out, [records or edges, config_path, whitelist], [empirical_path, null_path, report_path],
                   seed=sampler.seed, network_filter=network_filter, sampler=sampler)

    if report.degenerate:
        click.echo('degenerate test: empirical and null rho are constant and equal')
    else:
        click.echo(f't = {report.t_statistic:.4f}, p_t = {report.p_value_t:.3g}, '
                   f'p_empirical = {report.p_value_empirical:.4f}')


# --- METRICS ---
@cli.group('metrics')
def metrics():
    """Inequality and mobility measures over the hiring records."""


def metrics_inputs(f):
    f = output_option(f)
    f = filter_options(f)
    f = click.argument('records', type=click.Path(exists=True, dir_okay=False))(f)
    return f


def ranking_option(f):
    return click.option('--ranking', 'ranking_path', required=True, type=click.Path(exists=True, dir_okay=False),
                        help='Consensus ranking CSV written by the rank command.')(f)


def _filtered_records(records, network_filter):
    return network_filter.apply(read_records(records))


@metrics.command('gini')
@metrics_inputs
@reports_errors
def metrics_gini(records, years, disciplines, whitelist, output_dir):
    network_filter = _network_filter(years, disciplines, whitelist)
    net = build_network(read_records(records), network_filter)
    produced = faculty_production(net)

    out = _output_dir(output_dir)
    path = out / 'gini.json'
    value = gini(produced)
    write_json({'gini': value, 'n_institutions': net.n_nodes, 'total_production': net.total_weight}, path)
    write_manifest(out, [records, whitelist], [path], network_filter=network_filter)
    click.echo(f'gini {value:.4f}')


@metrics.command('lorenz')
@metrics_inputs
@reports_errors
def metrics_lorenz(records, years, disciplines, whitelist, output_dir):
    network_filter = _network_filter(years, disciplines, whitelist)
    net = build_network(read_records(records), network_filter)
    curve = lorenz(faculty_production(net))

    out = _output_dir(output_dir)
    curve_path, summary_path = out / 'lorenz.csv', out / 'lorenz.json'
    write_lorenz(curve, curve_path)
    write_json({'area': curve.area(), 'gini': curve.gini(), 'n_institutions': net.n_nodes}, summary_path)
    write_manifest(out, [records, whitelist], [curve_path, summary_path], network_filter=network_filter)
    click.echo(f'lorenz area {curve.area():.4f}')


@metrics.command('rankchange')
@metrics_inputs
@ranking_option
@reports_errors
def metrics_rankchange(records, years, disciplines, whitelist, output_dir, ranking_path):
    network_filter = _network_filter(years, disciplines, whitelist)
    registry, consensus = load_ranking(ranking_path)
    sample = relative_rank_change(_filtered_records(records, network_filter), consensus, registry)

    out = _output_dir(output_dir)
    table_path, summary_path = out / 'rank_change.csv', out / 'rankchange.json'
    write_rank_changes(sample, table_path)
    write_json({
        'upward_fraction': upward_fraction(sample),
        'mean_rank_change': mean_rank_change(sample),
        'n_total': sample.n_total,
        'n_up': sample.n_up,
        'n_dropped': sample.n_dropped,
    }, summary_path)
    write_manifest(out, [records, ranking_path, whitelist], [table_path, summary_path],
                   network_filter=network_filter)
    click.echo(f'upward fraction {upward_fraction(sample):.4f} over {sample.n_total} placements')


@metrics.command('ks')
@metrics_inputs
@ranking_option
@click.option('--cohort', 'cohorts', multiple=True, help='Half-open doctoral year range A:B (two or more).')
@reports_errors
def metrics_ks(records, years, disciplines, whitelist, output_dir, ranking_path, cohorts):
    """Compare relative rank change distributions across cohorts."""
    if len(cohorts) < 2:
        raise click.UsageError('ks needs at least two --cohort A:B options.')
    ranges = [parse_interval(cohort) for cohort in cohorts]
    network_filter = _network_filter(years, disciplines, whitelist)
    registry, consensus = load_ranking(ranking_path)
    kept = _filtered_records(records, network_filter)

    samples = {}
    for cohort, year_range in zip(cohorts, ranges):
        samples[cohort] = relative_rank_change(NetworkFilter(year_range=year_range).apply(kept), consensus, registry)

    pairs = []
    for a, b in combinations(cohorts, 2):
        d, p = ks_two_sample(samples[a].values, samples[b].values)
        pairs.append({'cohort_a': a, 'cohort_b': b, 'ks_D': d, 'ks_p': p})
    payload = {
        'cohorts': [{
            'cohort': cohort,
            'n_total': sample.n_total,
            'n_dropped': sample.n_dropped,
            'mean_rank_change': mean_rank_change(sample),
            'upward_fraction': upward_fraction(sample),
        } for cohort, sample in samples.items()],
        'pairs': pairs,
    }
    if len(pairs) == 1:
        payload.update(ks_D=pairs[0]['ks_D'], ks_p=pairs[0]['ks_p'])

    out = _output_dir(output_dir)
    path = out / 'ks.json'
    write_json(payload, path)
    write_manifest(out, [records, ranking_path, whitelist], [path], network_filter=network_filter)
    for pair in pairs:
        click.echo(f"{pair['cohort_a']} vs {pair['cohort_b']}: D = {pair['ks_D']:.4f}, p = {pair['ks_p']:.3g}")


@metrics.command('production')
@metrics_inputs
@reports_errors
def metrics_production(records, years, disciplines, whitelist, output_dir):
    network_filter = _network_filter(years, disciplines, whitelist)
    table = production_table(build_network(read_records(records), network_filter))

    out = _output_dir(output_dir)
    path = out / 'production.csv'
    table.to_csv(path, index=False, float_format='%.4f', lineterminator='\n')
    write_manifest(out, [records, whitelist], [path], network_filter=network_filter)


@metrics.command('trend')
@metrics_inputs
@reports_errors
def metrics_trend(records, years, disciplines, whitelist, output_dir):
    network_filter = _network_filter(years, disciplines, whitelist)
    table = yearly_counts(_filtered_records(records, network_filter))

    out = _output_dir(output_dir)
    path = out / 'trend.csv'
    table.to_csv(path, index=False, lineterminator='\n')
    write_manifest(out, [records, whitelist], [path], network_filter=network_filter)


# --- SYNTHETIC NETWORKS ---
@cli.command('synth')
@click.option('--nodes', type=int, required=True)
@click.option('--edges', type=int, required=True)
@click.option('--pdown', type=float, required=True, help='Probability that a placement points down the hierarchy.')
@click.option('--skew', type=float, help='Producer propensity exponent (default 1).')
@click.option('--seed', type=int, help='Generator seed (default 0).')
@click.option('--records', 'records_path', type=click.Path(dir_okay=False),
              help='Also write one person-level record per placement to this CSV.')
@click.option('--years', default='2000:2010', show_default=True, help='Doctoral year range of the records.')
@click.option('--discipline', default='synthetic', show_default=True)
@output_option
@reports_errors
def synth(nodes, edges, pdown, skew, seed, records_path, years, discipline, output_dir):
    """Generate a network with a planted hierarchy."""
    form = _validated(bind_form(PlantedForm, {
        'n_nodes': nodes, 'n_edges': edges, 'p_down': pdown, 'producer_skew': skew, 'seed': seed,
    }))
    cfg = form.to_config()
    year_range = parse_interval(years)
    net, truth = generate_planted(cfg)

    out = _output_dir(output_dir)
    edges_path, truth_path = out / 'edges.csv', out / 'truth.csv'
    write_edge_list(net, edges_path)
    write_truth(net.registry, truth, truth_path)
    outputs = [edges_path, truth_path]
    if records_path:
        write_records(planted_records(net, year_range, discipline, cfg.seed), records_path)
        outputs.append(records_path)
    write_manifest(out, [], outputs, seed=cfg.seed)
    click.echo(f'{net.n_nodes} institutions, {net.total_weight} placements')


# --- EXACT OPTIMUM ---
@cli.command('oracle')
@click.argument('edges', type=click.Path(exists=True, dir_okay=False))
@output_option
@reports_errors
def oracle(edges, output_dir):
    """Exhaustive Minimum Violation Ranking for networks of at most 10 institutions."""
    net = load_edge_list(edges)
    score, optimal_rho, optima = brute_force_mvr(net)
    names = net.registry.names

    out = _output_dir(output_dir)
    path = out / 'oracle.json'
    write_json({
        'optimal_score': score,
        'optimal_rho': round(optimal_rho, 4),
        'n_optima': len(optima),
        'optima': [[names[node] for node in ranking.node_at] for ranking in optima],
    }, path)
    write_manifest(out, [edges], [path])
    click.echo(f'S = {score}, rho = {optimal_rho:.4f}, {len(optima)} optimal ranking(s)')


# --- REPLAY ---
@cli.command('replay')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def replay(ctx, manifest):
    """Re-run the command recorded in a manifest.json."""
    try:
        with open(manifest, encoding='utf-8') as handle:
            argv = json.load(handle)['argv']
    except (ValueError, KeyError, TypeError) as e:
        raise click.UsageError(f'{manifest} is not a run manifest: {e}') from e
    if not argv or argv[0] == 'replay':
        raise click.UsageError(f'{manifest} does not record a replayable command.')

    current_app.logger.info('Replaying %s', ' '.join(argv))
    with cli.make_context(ctx.find_root().info_name, list(argv), obj=ctx.obj) as replay_ctx:
        cli.invoke(replay_ctx)


if __name__ == '__main__':
    cli()

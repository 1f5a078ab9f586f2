"""
End-to-end checks for hierarchyrank
Covers the full flow: Generate planted network → Rank → Null model → Mobility metrics → Cohort comparison
"""
import json

import pytest
from scipy import stats

from app import cli
from conftest import save_records
from models import PlantedConfig, SamplerConfig
from mvr import rho, sample_mvr
from null_model import bootstrap_rho, null_rho_distribution, significance
from synth import generate_planted, planted_records

PLANTED = PlantedConfig(n_nodes=50, n_edges=2000, p_down=0.9, producer_skew=1.0, seed=42)
REPLICATE_SAMPLER = SamplerConfig(total_iterations=20_000, burn_in=5_000, sample_interval=500, restarts=2, seed=42)


@pytest.fixture(scope='module')
def planted():
    return generate_planted(PLANTED)


@pytest.mark.slow
def test_planted_hierarchy_is_recovered(planted):
    net, truth = planted
    result = sample_mvr(net, SamplerConfig(seed=42))
    tau, _ = stats.kendalltau(result.consensus.rank_of, truth.rank_of)
    assert tau >= 0.8
    assert result.best_rho >= rho(net, truth)


@pytest.mark.slow
def test_empirical_rho_separates_from_null(planted):
    net, _ = planted
    empirical = bootstrap_rho(net, 50, REPLICATE_SAMPLER, seed=42)
    null = null_rho_distribution(net, 50, REPLICATE_SAMPLER, seed=42)
    assert min(empirical.values) > max(null.values)

    report = significance(empirical, null)
    assert report.p_value_empirical == pytest.approx(1 / 51)
    assert report.p_value_t < 1e-5
    assert report.empirical_mean > report.null_mean


@pytest.mark.slow
def test_cohort_pipeline_through_the_cli(runner, tmp_path):
    # an older cohort with more upward moves than the newer one, on the same institutions
    older, _ = generate_planted(PlantedConfig(n_nodes=40, n_edges=1500, p_down=0.8, seed=1))
    newer, _ = generate_planted(PlantedConfig(n_nodes=40, n_edges=1500, p_down=0.95, seed=2))
    records = planted_records(older, (1990, 2000), 'cs', seed=1) + planted_records(newer, (2000, 2010), 'cs', seed=2)
    records_path = save_records(tmp_path / 'records.csv', records)
    out = tmp_path / 'run'

    result = runner.invoke(cli, ['rank', str(records_path), '--iters', '20000', '--burnin', '5000',
                                 '--interval', '200', '--restarts', '2', '--seed', '3', '--output-dir', str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads((out / 'rank_report.json').read_text())['total_weight'] == 3000

    ranking = str(out / 'ranking.csv')
    result = runner.invoke(cli, ['metrics', 'ks', str(records_path), '--ranking', ranking,
                                 '--cohort', '1990:2000', '--cohort', '2000:2010', '--output-dir', str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / 'ks.json').read_text())
    assert report['ks_p'] < 0.01
    older_summary, newer_summary = report['cohorts']
    assert older_summary['upward_fraction'] > newer_summary['upward_fraction']

    result = runner.invoke(cli, ['metrics', 'rankchange', str(records_path), '--ranking', ranking,
                                 '--output-dir', str(out)])
    assert result.exit_code == 0, result.output
    summary = json.loads((out / 'rankchange.json').read_text())
    assert summary['n_total'] == 3000
    assert 0.0 < summary['upward_fraction'] < 0.5

    result = runner.invoke(cli, ['metrics', 'gini', str(records_path), '--output-dir', str(out)])
    assert result.exit_code == 0, result.output
    assert 0.0 < json.loads((out / 'gini.json').read_text())['gini'] < 1.0


def test_planted_fixture_downward_fraction(planted):
    net, truth = planted
    assert rho(net, truth) == pytest.approx(PLANTED.p_down, abs=0.03)
    assert net.total_weight == PLANTED.n_edges

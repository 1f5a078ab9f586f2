import pytest

from app import create_app
from models import HiringNetwork, NodeRegistry, SamplerConfig
from network import write_records


@pytest.fixture
def app():
    return create_app({'TESTING': True, 'THREADS': 1})


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def quick_sampler():
    return SamplerConfig(total_iterations=4000, burn_in=1000, sample_interval=50, restarts=4, seed=0)


def network_of(edges):
    """HiringNetwork from (src_name, dst_name, weight) triples."""
    registry = NodeRegistry.from_names([name for src, dst, _ in edges for name in (src, dst)])
    weights = {}
    for src, dst, weight in edges:
        key = (registry.id_of(src), registry.id_of(dst))
        weights[key] = weights.get(key, 0) + weight
    return HiringNetwork.from_weights(registry, weights)


def write_edges_csv(path, edges):
    lines = ['src,dst,weight'] + [f'{src},{dst},{weight}' for src, dst, weight in edges]
    path.write_text('\n'.join(lines) + '\n')
    return path


def save_records(path, records):
    write_records(records, path)
    return path

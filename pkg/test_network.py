import io

import numpy as np
import pytest

from conftest import network_of, write_edges_csv
from errors import ContractError, EmptyNetworkError, InputFormatError, RecordFormatError, RecordRowError
from models import HiringRecord, NetworkFilter
from network import (
    build_network,
    degree_sequences,
    load_edge_list,
    load_records,
    load_whitelist,
    read_records,
    records_frame,
    write_edge_list,
    write_records,
)

HEADER = 'person_id,phd_institution,phd_year,discipline,hire_institution\n'


def _records(text):
    return load_records(io.BytesIO(text.encode('utf-8')))


def record(person, phd, year, hire, discipline='cs'):
    return HiringRecord(person, phd, year, discipline, hire)


def test_load_records_keeps_file_order_and_strips_fields():
    records = _records(HEADER + 'p1, MIT ,2001,cs,Stanford\np2,Stanford,1999,math,MIT\n')
    assert [r.person_id for r in records] == ['p1', 'p2']
    assert records[0].phd_institution == 'MIT'
    assert records[0].phd_year == 2001
    assert records[1].discipline == 'math'


def test_missing_column_is_named():
    with pytest.raises(RecordFormatError, match='discipline'):
        _records('person_id,phd_institution,phd_year,hire_institution\np1,A,2000,B\n')


def test_non_integer_year_reports_line():
    with pytest.raises(RecordRowError, match="Row 3: phd_year is not an integer: '20x5'") as info:
        _records(HEADER + 'p1,A,2000,cs,B\np2,A,20x5,cs,B\n')
    assert info.value.line == 3


def test_empty_institution_and_non_positive_year_rejected():
    with pytest.raises(RecordRowError, match='Row 2'):
        _records(HEADER + 'p1,,2000,cs,B\n')
    with pytest.raises(RecordRowError, match='positive'):
        _records(HEADER + 'p1,A,0,cs,B\n')


def test_short_row_rejected():
    with pytest.raises(RecordRowError, match='Row 2'):
        _records(HEADER + 'p1,A,2000\n')


def test_write_then_read_records(tmp_path):
    records = [record('p1', 'A', 2000, 'B'), record('p2', 'B', 2003, 'B', 'math')]
    path = tmp_path / 'records.csv'
    write_records(records, path)
    assert read_records(path) == records


def test_build_network_counts_placements_and_self_hires():
    records = [
        record('p1', 'A', 2000, 'B'),
        record('p2', 'A', 2001, 'B'),
        record('p3', 'B', 2002, 'A'),
        record('p4', 'A', 2003, 'A'),
    ]
    net = build_network(records)
    assert net.registry.names == ('A', 'B')
    assert net.weights == {(0, 0): 1, (0, 1): 2, (1, 0): 1}
    assert net.total_weight == 4
    assert net.self_loop_weight == 1
    assert net.non_loop_weight == 3


def test_flow_matrix_is_antisymmetric():
    net = network_of([('A', 'B', 3), ('B', 'A', 1), ('B', 'C', 2), ('C', 'C', 4)])
    flow = net.flow_matrix
    assert (flow == -flow.T).all()
    assert flow[0, 1] == 2
    assert flow[2, 2] == 0


def test_year_filter_is_half_open():
    records = [record('p1', 'A', 1999, 'B'), record('p2', 'A', 2000, 'B'), record('p3', 'B', 2010, 'C')]
    net = build_network(records, NetworkFilter(year_range=(2000, 2010)))
    assert net.registry.names == ('A', 'B')
    assert net.total_weight == 1


def test_filter_without_survivors_raises_empty_network():
    records = [record('p1', 'A', 1990, 'B')]
    with pytest.raises(EmptyNetworkError, match='empty network'):
        build_network(records, NetworkFilter(year_range=(2000, 2010)))


def test_discipline_and_whitelist_filters():
    records = [
        record('p1', 'A', 2000, 'B', 'cs'),
        record('p2', 'A', 2000, 'C', 'cs'),
        record('p3', 'B', 2000, 'A', 'math'),
    ]
    net = build_network(records, NetworkFilter(disciplines=frozenset({'cs'}), whitelist=frozenset({'A', 'B'})))
    assert net.weights == {(0, 1): 1}


def test_filter_rejects_inverted_range():
    with pytest.raises(ContractError):
        NetworkFilter(year_range=(2010, 2000))


def test_whitelist_file_ignores_blank_lines(tmp_path):
    path = tmp_path / 'whitelist.txt'
    path.write_text(' MIT \n\nStanford\n')
    assert load_whitelist(path) == frozenset({'MIT', 'Stanford'})


def test_degree_sequences_are_weighted():
    net = network_of([('A', 'B', 3), ('A', 'C', 1), ('C', 'A', 2), ('B', 'B', 1)])
    out_degree, in_degree = degree_sequences(net)
    assert out_degree.tolist() == [4, 1, 2]
    assert in_degree.tolist() == [2, 4, 1]
    assert out_degree.sum() == in_degree.sum() == net.total_weight


def test_edge_list_round_trip(tmp_path):
    net = network_of([('A', 'B', 3), ('B', 'C', 1), ('C', 'C', 2)])
    path = tmp_path / 'edges.csv'
    write_edge_list(net, path)
    assert path.read_text() == 'src,dst,weight\nA,B,3\nB,C,1\nC,C,2\n'
    assert load_edge_list(path) == net


def test_edge_list_sums_repeated_rows(tmp_path):
    path = write_edges_csv(tmp_path / 'edges.csv', [('A', 'B', 1), ('A', 'B', 2)])
    assert load_edge_list(path).weights == {(0, 1): 3}


def test_edge_list_rejects_bad_input(tmp_path):
    (tmp_path / 'bad.csv').write_text('from,to,weight\nA,B,1\n')
    with pytest.raises(InputFormatError, match='header'):
        load_edge_list(tmp_path / 'bad.csv')
    with pytest.raises(RecordRowError, match='Row 3'):
        load_edge_list(write_edges_csv(tmp_path / 'zero.csv', [('A', 'B', 1), ('B', 'C', 0)]))
    with pytest.raises(EmptyNetworkError):
        load_edge_list(write_edges_csv(tmp_path / 'empty.csv', []))


def test_records_frame_columns():
    frame = records_frame([record('p1', 'A', 2000, 'B')])
    assert list(frame.columns) == ['person_id', 'phd_institution', 'phd_year', 'discipline', 'hire_institution']


def test_header_only_gives_no_records():
    assert _records(HEADER) == []


def test_byte_order_mark_is_ignored():
    records = _records('\ufeff' + HEADER + 'p1,A,2000,cs,B\n')
    assert records == [record('p1', 'A', 2000, 'B')]


def random_records(rng, count):
    names = ['A', 'B', 'C', 'D', 'E', 'F']
    return [
        record(f'p{k}', names[int(rng.integers(6))], int(rng.integers(1995, 2015)), names[int(rng.integers(6))],
               ['cs', 'math', 'bio'][int(rng.integers(3))])
        for k in range(count)
    ]


def test_filtering_commutes_with_building():
    rng = np.random.default_rng(41)
    for _ in range(50):
        records = random_records(rng, int(rng.integers(20, 80)))
        network_filter = NetworkFilter(
            year_range=(2000, 2010),
            disciplines=frozenset({'cs', 'math'}),
            whitelist=frozenset({'A', 'B', 'C', 'D'}),
        )
        kept = network_filter.apply(records)
        if not kept:
            continue
        assert build_network(records, network_filter) == build_network(kept)
        assert build_network(records, network_filter) == build_network(records, network_filter)
        assert build_network(kept).total_weight == len(kept)


def test_network_arrays_are_read_only():
    net = network_of([('A', 'B', 3), ('B', 'C', 1)])
    for array in (net.src, net.dst, net.weight, net.flow_matrix):
        with pytest.raises(ValueError):
            array[0] = 7
    assert net.total_weight == 4

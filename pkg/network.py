import csv
import io
import logging

import numpy as np
import pandas as pd

from errors import EmptyNetworkError, InputFormatError, RecordFormatError, RecordRowError
from models import RECORD_COLUMNS, HiringNetwork, HiringRecord, NetworkFilter, NodeRegistry

log = logging.getLogger(__name__)

EDGE_COLUMNS = ['src', 'dst', 'weight']


def load_records(source):
    """Parse person-level hiring records from a binary stream of UTF-8 CSV text.

    Rows keep their file order. Errors name the 1-based file line of the offending row.
    """
    try:
        stream = io.StringIO(source.read().decode('utf-8-sig'), newline='')
    except UnicodeDecodeError as e:
        raise RecordFormatError(f'Records file is not valid UTF-8: {e}') from e
    reader = csv.DictReader(stream)

    header = [name.strip() for name in (reader.fieldnames or [])]
    if not header:
        raise RecordFormatError('Records file has no header row.')
    missing = [column for column in RECORD_COLUMNS if column not in header]
    if missing:
        raise RecordFormatError(f'Records header is missing column(s): {", ".join(missing)}')
    reader.fieldnames = header

    records = []
    for row in reader:
        line = reader.line_num
        if any(row.get(column) is None for column in RECORD_COLUMNS):
            raise RecordRowError(line, f'expected {len(RECORD_COLUMNS)} fields')
        fields = {column: row[column].strip() for column in RECORD_COLUMNS}

        for column in ('phd_institution', 'hire_institution'):
            if not fields[column]:
                raise RecordRowError(line, f'empty {column}')
        try:
            year = int(fields['phd_year'])
        except ValueError:
            raise RecordRowError(line, f"phd_year is not an integer: '{fields['phd_year']}'") from None
        if year <= 0:
            raise RecordRowError(line, f'phd_year must be positive, got {year}')

        records.append(HiringRecord(
            person_id=fields['person_id'],
            phd_institution=fields['phd_institution'],
            phd_year=year,
            discipline=fields['discipline'],
            hire_institution=fields['hire_institution'],
        ))
    return records


def read_records(path):
    with open(path, 'rb') as source:
        return load_records(source)


def records_frame(records):
    return pd.DataFrame(
        [[r.person_id, r.phd_institution, r.phd_year, r.discipline, r.hire_institution] for r in records],
        columns=RECORD_COLUMNS,
    )


def write_records(records, path):
    records_frame(records).to_csv(path, index=False, lineterminator='\n')


def load_whitelist(path):
    with open(path, encoding='utf-8-sig') as handle:
        return frozenset(line.strip() for line in handle if line.strip())


def build_network(records, network_filter=None):
    """Aggregate surviving records into m_ij counts (i = doctoral institution, j = employer)."""
    network_filter = network_filter or NetworkFilter()
    kept = network_filter.apply(records)
    if not kept:
        raise EmptyNetworkError('empty network: no records survive filtering')

    frame = records_frame(kept)
    registry = NodeRegistry.from_names(pd.concat([frame['phd_institution'], frame['hire_institution']]))
    counts = frame.groupby(['phd_institution', 'hire_institution']).size()
    weights = {(registry.id_of(src), registry.id_of(dst)): int(count) for (src, dst), count in counts.items()}

    net = HiringNetwork.from_weights(registry, weights)
    log.info('Built network: %d institutions, %d edges, %d placements (%d dropped by filter)',
             net.n_nodes, net.n_edges, net.total_weight, len(records) - len(kept))
    return net


def degree_sequences(net: HiringNetwork):
    """Weighted (out_degree, in_degree) arrays indexed by node id."""
    graph = net.to_graph()
    out_degree = np.array([d for _, d in sorted(graph.out_degree(weight='weight'))], dtype=np.int64)
    in_degree = np.array([d for _, d in sorted(graph.in_degree(weight='weight'))], dtype=np.int64)
    return out_degree, in_degree


def write_edge_list(net: HiringNetwork, path):
    net.edge_frame().to_csv(path, index=False, lineterminator='\n')


def load_edge_list(path):
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8-sig')
    except pd.errors.EmptyDataError:
        raise InputFormatError(f'Edge list {path} is empty') from None
    except pd.errors.ParserError as e:
        raise InputFormatError(f'Edge list {path} is not valid CSV: {e}') from None
    if [column.strip() for column in frame.columns] != EDGE_COLUMNS:
        raise InputFormatError(f'Edge list header must be {",".join(EDGE_COLUMNS)}')
    frame.columns = EDGE_COLUMNS

    rows = []
    for offset, (src, dst, weight) in enumerate(frame.itertuples(index=False, name=None)):
        line = offset + 2
        src, dst = src.strip(), dst.strip()
        if not src or not dst:
            raise RecordRowError(line, 'empty institution name')
        try:
            value = int(weight.strip())
        except ValueError:
            raise RecordRowError(line, f"weight is not an integer: '{weight}'") from None
        if value < 1:
            raise RecordRowError(line, f'weight must be positive, got {value}')
        rows.append((src, dst, value))
    if not rows:
        raise EmptyNetworkError('empty network: edge list has no rows')

    edges = pd.DataFrame(rows, columns=EDGE_COLUMNS).groupby(['src', 'dst'])['weight'].sum()
    registry = NodeRegistry.from_names([name for pair in edges.index for name in pair])
    weights = {(registry.id_of(src), registry.id_of(dst)): int(w) for (src, dst), w in edges.items()}
    return HiringNetwork.from_weights(registry, weights)

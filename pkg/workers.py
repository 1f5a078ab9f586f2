import logging
from concurrent.futures import ProcessPoolExecutor

log = logging.getLogger(__name__)


def parallel_map(fn, items, workers=1):
    """Apply ``fn`` to every item, returning results in item order.

    Runs inline unless more than one worker and more than one item are available.
    ``fn`` must be a module-level callable so it can be sent to worker processes.
    """
    items = list(items)
    workers = max(1, int(workers or 1))
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    max_workers = min(workers, len(items))
    log.debug('Dispatching %d tasks to %d worker processes', len(items), max_workers)
    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(fn, items))

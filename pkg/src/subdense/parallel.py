"""Thread fan-out for grid work and atomic file output."""
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    """Worker cap from SUBDENSE_THREADS, else the CPU count."""
    env = os.environ.get("SUBDENSE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 1
        return max(n, 1)
    return os.cpu_count() or 1


def fan_out(fn, items):
    """Map fn over items on a thread pool, preserving order."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def atomic_write(path, data, mode="w"):
    """Write to a temporary file in the target directory, then rename over path."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        kwargs = {"encoding": "utf-8", "newline": ""} if "b" not in mode else {}
        with os.fdopen(fd, mode, **kwargs) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

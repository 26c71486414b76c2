import os
import sys
import threading
import collections


def _env_threads(default=None):
    value = os.environ.get("CASEKIN_THREADS", "")
    try:
        count = int(value)
    except ValueError:
        count = default or os.cpu_count() or 1
    return max(count, 1)


class ThreadPool(object):
    """
    Runs independent work items on worker threads. Results come back in
    item order whatever the thread count, and the exception of the
    lowest-indexed failing item is re-raised in the caller.

    >>> ThreadPool(max_threads=3).map(lambda x: x * x, range(5))
    [0, 1, 4, 9, 16]
    """

    _Thread = staticmethod(threading.Thread)
    _Lock = staticmethod(threading.Lock)
    _deque = staticmethod(collections.deque)
    _exc_info = staticmethod(sys.exc_info)

    def __init__(self, max_threads=None):
        self.max_threads = max_threads

    @property
    def threads(self):
        if self.max_threads is None:
            return _env_threads()
        return max(int(self.max_threads), 1)

    def map(self, func, items):
        items = list(items)
        count = min(self.threads, len(items))
        if count <= 1:
            return [func(item) for item in items]

        lock = self._Lock()
        queue = self._deque(enumerate(items))
        results = [None] * len(items)
        failures = {}

        workers = []
        for _ in range(count):
            worker = self._Thread(target=self._thread, args=(func, lock, queue, results, failures))
            worker.daemon = True
            worker.start()
            workers.append(worker)

        for worker in workers:
            worker.join()

        if failures:
            _, exc_value, exc_tb = failures[min(failures)]
            raise exc_value.with_traceback(exc_tb)
        return results

    def _thread(self, func, lock, queue, results, failures):
        while True:
            with lock:
                if not queue:
                    return
                index, item = queue.popleft()

            try:
                results[index] = func(item)
            except Exception:
                failures[index] = self._exc_info()


global_threadpool = ThreadPool()
thread_map = global_threadpool.map

''' Thread pool for independent units of work (replications, cross-validation cells) '''
import logging
from queue import Queue
from threading import Thread


__all__ = ('JobResult', 'run_jobs')


class JobResult(object):
    __slots__ = ('index', 'ok', 'value', 'error')

    def __init__(self, index, ok, value=None, error=None):
        self.index = index
        self.ok = ok
        self.value = value
        self.error = error

    def __repr__(self):
        return f'JobResult(index={self.index}, ok={self.ok}, error={self.error!r})'


def _call(index, func, args):
    try:
        return JobResult(index, True, func(*args))
    except Exception as err:
        logging.warning(f'job {index} failed: {type(err).__name__}: {err}')
        return JobResult(index, False, error=err)


class _WorkerThread(Thread):
    def __init__(self, jobs, results):
        super().__init__()
        self.daemon = True
        self._jobs = jobs
        self._results = results

    def run(self):
        while True:
            job = self._jobs.get()
            if job is None:  # stop signal
                return
            index, func, args = job
            self._results[index] = _call(index, func, args)


def run_jobs(func, arg_list, threads=1):
    ''' call func(*args) for every entry of arg_list; results come back in input order

    A job that raises is logged and returned with ok=False; the others are
    unaffected.
    '''
    arg_list = list(arg_list)
    if threads < 1:
        threads = 1
    if threads == 1 or len(arg_list) <= 1:
        return [_call(i, func, args) for i, args in enumerate(arg_list)]
    jobs = Queue()
    results = [None] * len(arg_list)
    workers = [_WorkerThread(jobs, results) for _ in range(min(threads, len(arg_list)))]
    for worker in workers:
        worker.start()
    for i, args in enumerate(arg_list):
        jobs.put((i, func, args))
    for _ in workers:
        jobs.put(None)
    for worker in workers:
        worker.join()
    logging.debug(f'{len(arg_list)} jobs finished on {len(workers)} threads')
    return results

"""Task-dependency runtime for the engine's shared-memory parallelism.

Semantics: non-blocking submission, tasks ordered only by declared data
regions (write-write, write-read, read-write conflicts on the same region
id), integer queues as ordering scopes for wait(), a global taskwait_all
barrier, and block-partitioned loops. Queues do not own threads; a fixed
worker pool serves all of them.

Task bodies may submit more tasks but must never block on other tasks
except through declared regions; the blocking entry points (wait,
taskwait_all, parallel_for_blocks) refuse to run on worker threads so the
pool cannot starve itself.
"""

import csv
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import SchedulerError

__all__ = [
    "DataRegion",
    "TaskSpec",
    "TraceEvent",
    "TaskHandle",
    "Scheduler",
    "THREAD_LIMIT",
    "NUM_TEAMS",
]

# Device launch parameters carried over from the batch scripts that shaped
# this runtime's interface. No host analog; kept for reference, unused.
THREAD_LIMIT = 256
NUM_TEAMS = 391

_MODES = ("read", "write", "readwrite")


@dataclass(frozen=True)
class DataRegion:
    """Named array whose declared use orders tasks; ids match by equality."""

    id: str
    mode: str = "readwrite"

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")


@dataclass
class TaskSpec:
    work: Callable
    regions: tuple = ()
    queue: int = 0
    tag: str = "task"


@dataclass(frozen=True)
class TraceEvent:
    tag: str
    queue: int
    worker: int
    start_ns: int
    end_ns: int


class _Task:
    __slots__ = (
        "spec", "npred", "dependents", "done", "exc", "value", "event", "group",
    )

    def __init__(self, spec, group):
        self.spec = spec
        self.npred = 0
        self.dependents = []
        self.done = False
        self.exc = None
        self.value = None
        self.event = threading.Event()
        self.group = group


class TaskHandle:
    """Completion handle for one submitted task."""

    __slots__ = ("_task",)

    def __init__(self, task: _Task):
        self._task = task

    def wait(self, timeout: Optional[float] = None) -> bool:
        return self._task.event.wait(timeout)

    def result(self, timeout: Optional[float] = None):
        if not self._task.event.wait(timeout):
            raise SchedulerError("timed out waiting for task")
        if self._task.exc is not None:
            raise self._task.exc
        return self._task.value

    @property
    def done(self) -> bool:
        return self._task.done

    @property
    def exception(self):
        return self._task.exc


class Scheduler:
    """Fixed thread pool with region-dependency ordering and queue barriers."""

    def __init__(self, workers: int = 1, trace: bool = True):
        if workers < 1:
            raise SchedulerError("workers must be >= 1")
        self.workers = workers
        self._lock = threading.Lock()
        self._work = threading.Condition(self._lock)   # ready tasks / shutdown
        self._idle = threading.Condition(self._lock)   # completions
        self._ready = deque()
        self._outstanding = {}          # queue id -> submitted-not-finished
        self._total = 0
        self._last_writer = {}          # region id -> _Task
        self._readers = {}              # region id -> [_Task] since last write
        self._enter_depth = {}          # region id -> active data-region enters
        self._trace_on = trace
        self._trace = []
        self._failures = []             # failed tasks not yet re-raised
        self._down = False
        self._worker_idents = set()
        self._threads = []
        for wid in range(workers):
            t = threading.Thread(target=self._run, args=(wid,), daemon=True)
            t.start()
            self._threads.append(t)

    # -- worker loop ------------------------------------------------------

    def _run(self, wid: int):
        with self._lock:
            self._worker_idents.add(threading.get_ident())
        while True:
            with self._work:
                while not self._ready and not self._down:
                    self._work.wait()
                if self._down and not self._ready:
                    return
                task = self._ready.popleft()
            start = time.monotonic_ns()
            try:
                task.value = task.spec.work()
            except BaseException as exc:
                task.exc = exc
            end = time.monotonic_ns()
            self._finish(task, wid, start, end)

    def _finish(self, task: _Task, wid: int, start: int, end: int):
        with self._lock:
            if self._trace_on:
                self._trace.append(
                    TraceEvent(task.spec.tag, task.spec.queue, wid, start, end)
                )
            task.done = True
            if task.exc is not None:
                self._failures.append(task)
            woke = False
            for dep in task.dependents:
                dep.npred -= 1
                if dep.npred == 0:
                    self._ready.append(dep)
                    woke = True
            task.dependents = []
            self._outstanding[task.spec.queue] -= 1
            self._total -= 1
            if task.group is not None:
                task.group[0] -= 1
            if woke:
                self._work.notify_all()
            self._idle.notify_all()
        task.event.set()

    # -- submission -------------------------------------------------------

    def _submit_locked(self, spec: TaskSpec, group) -> TaskHandle:
        if self._down:
            raise SchedulerError("submit after shutdown")
        if spec.queue < 0:
            raise SchedulerError("queue id must be >= 0")
        seen = set()
        for r in spec.regions:
            if r.id in seen:
                raise SchedulerError(f"task lists region {r.id!r} more than once")
            seen.add(r.id)
        task = _Task(spec, group)
        preds = set()
        for r in spec.regions:
            writer = self._last_writer.get(r.id)
            if writer is not None and not writer.done:
                preds.add(writer)
            if r.mode == "read":
                lst = self._readers.setdefault(r.id, [])
                if len(lst) > 64:
                    lst[:] = [t for t in lst if not t.done]
                lst.append(task)
            else:
                for rd in self._readers.get(r.id, ()):
                    if not rd.done:
                        preds.add(rd)
                self._last_writer[r.id] = task
                self._readers[r.id] = []
        for p in preds:
            p.dependents.append(task)
        task.npred = len(preds)
        self._outstanding[spec.queue] = self._outstanding.get(spec.queue, 0) + 1
        self._total += 1
        if task.npred == 0:
            self._ready.append(task)
            self._work.notify()
        return TaskHandle(task)

    def submit(self, spec: TaskSpec) -> TaskHandle:
        """Non-blocking: returns before, and regardless of, task execution."""
        with self._lock:
            return self._submit_locked(spec, None)

    def submit_work(self, body: Callable, queue: int = 0, tag: str = "task",
                    regions=()) -> TaskHandle:
        return self.submit(TaskSpec(work=body, regions=tuple(regions),
                                    queue=queue, tag=tag))

    # -- barriers ---------------------------------------------------------

    def _assert_orchestrator(self, opname: str):
        if threading.get_ident() in self._worker_idents:
            raise SchedulerError(f"{opname} must not be called from task bodies")

    def _raise_failure_locked(self, pred):
        for i, task in enumerate(self._failures):
            if pred(task):
                del self._failures[i]
                raise task.exc
        return None

    def wait(self, queues):
        """Block until every task submitted to the listed queues completed."""
        self._assert_orchestrator("wait")
        if isinstance(queues, int):
            queues = (queues,)
        qs = frozenset(queues)
        with self._idle:
            self._idle.wait_for(
                lambda: all(self._outstanding.get(q, 0) == 0 for q in qs)
            )
            self._raise_failure_locked(lambda t: t.spec.queue in qs)

    def taskwait_all(self, timeout: Optional[float] = None):
        """Global quiescence, including tasks submitted by running tasks."""
        self._assert_orchestrator("taskwait_all")
        with self._idle:
            if not self._idle.wait_for(lambda: self._total == 0, timeout):
                raise SchedulerError("taskwait_all timed out")
            self._raise_failure_locked(lambda t: True)

    def parallel_for_blocks(self, rng, grainsize: int, body: Callable,
                            queue: int = 0, tag: str = "block"):
        """Run body(lo, hi) over contiguous blocks; returns when all finish."""
        self._assert_orchestrator("parallel_for_blocks")
        if grainsize < 1:
            raise SchedulerError("grainsize must be >= 1")
        lo, hi = (0, rng) if isinstance(rng, int) else rng
        if hi <= lo:
            return
        bounds = [(b, min(b + grainsize, hi)) for b in range(lo, hi, grainsize)]
        group = [len(bounds)]
        tasks = []
        with self._lock:
            for blo, bhi in bounds:
                spec = TaskSpec(
                    work=lambda blo=blo, bhi=bhi: body(blo, bhi),
                    queue=queue, tag=tag,
                )
                tasks.append(self._submit_locked(spec, group)._task)
        with self._idle:
            self._idle.wait_for(lambda: group[0] == 0)
            mine = set(id(t) for t in tasks)
            self._raise_failure_locked(lambda t: id(t) in mine)

    # -- data-region lifecycle ---------------------------------------------

    @staticmethod
    def _region_ids(regions):
        return tuple(r.id if isinstance(r, DataRegion) else r for r in regions)

    def data_region_enter(self, regions, queue: int = 0) -> TaskHandle:
        """Ordering fence: later users of these regions start after it."""
        ids = self._region_ids(regions)
        with self._lock:
            spec = TaskSpec(
                work=lambda: None,
                regions=tuple(DataRegion(i, "write") for i in ids),
                queue=queue, tag="region_enter",
            )
            handle = self._submit_locked(spec, None)
            for i in ids:
                self._enter_depth[i] = self._enter_depth.get(i, 0) + 1
        return handle

    def data_region_exit(self, regions, queue: int = 0) -> TaskHandle:
        """Ordering fence after all prior users; must match an enter."""
        ids = self._region_ids(regions)
        with self._lock:
            for i in ids:
                if self._enter_depth.get(i, 0) < 1:
                    raise SchedulerError(
                        f"data_region_exit without matching enter for {i!r}"
                    )
            for i in ids:
                self._enter_depth[i] -= 1
            spec = TaskSpec(
                work=lambda: None,
                regions=tuple(DataRegion(i, "write") for i in ids),
                queue=queue, tag="region_exit",
            )
            return self._submit_locked(spec, None)

    # -- trace and lifecycle ------------------------------------------------

    def trace(self):
        with self._lock:
            return list(self._trace)

    def write_trace_csv(self, path):
        events = self.trace()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tag", "queue", "worker", "start_ns", "end_ns"])
            for ev in events:
                w.writerow([ev.tag, ev.queue, ev.worker, ev.start_ns, ev.end_ns])

    def shutdown(self):
        """Drain outstanding tasks, then stop the pool. Idempotent."""
        with self._idle:
            if self._down:
                return
            self._idle.wait_for(lambda: self._total == 0)
            self._down = True
            self._work.notify_all()
        for t in self._threads:
            t.join()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.shutdown()
        return False

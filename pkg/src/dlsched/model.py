"""Domain types shared by the schedulers and the simulator.

Servers are dense integers ``1..M``. Time is counted in whole slots.
"""
from __future__ import annotations

from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field


class InvalidJob(ValueError):
    """A job or task violates the data-locality model (e.g. no available server)."""


@dataclass(frozen=True)
class TaskGroup:
    job_id: int
    group_index: int
    task_count: int
    available_servers: tuple[int, ...]

    def __post_init__(self):
        if self.task_count < 1:
            raise InvalidJob(f"group {self.group_index} of job {self.job_id} has no tasks")
        if not self.available_servers:
            raise InvalidJob(f"group {self.group_index} of job {self.job_id} has no available server")
        servers = tuple(sorted(set(self.available_servers)))
        object.__setattr__(self, "available_servers", servers)


@dataclass(frozen=True)
class Job:
    id: int
    arrival: int
    groups: tuple[TaskGroup, ...]
    name: str | None = None

    def __post_init__(self):
        if self.arrival < 0:
            raise InvalidJob(f"job {self.id} arrives at negative slot {self.arrival}")
        if not self.groups:
            raise InvalidJob(f"job {self.id} has no task groups")
        seen = set()
        for g in self.groups:
            if g.available_servers in seen:
                raise InvalidJob(f"job {self.id} has two groups with servers {g.available_servers}")
            seen.add(g.available_servers)
        object.__setattr__(self, "groups", tuple(self.groups))

    @property
    def task_count(self) -> int:
        return sum(g.task_count for g in self.groups)

    @property
    def servers(self) -> tuple[int, ...]:
        """Union of the available servers of all groups, ascending."""
        return tuple(sorted({m for g in self.groups for m in g.available_servers}))

    def group(self, index: int) -> TaskGroup:
        for g in self.groups:
            if g.group_index == index:
                return g
        raise KeyError(index)

    @classmethod
    def build(cls, job_id: int, groups: Iterable[tuple[int, Iterable[int]]],
              arrival: int = 0, name: str | None = None) -> "Job":
        """Make a job from ``(task_count, servers)`` pairs, indexing groups from 1."""
        tg = tuple(TaskGroup(job_id, k, n, tuple(s)) for k, (n, s) in enumerate(groups, start=1))
        return cls(job_id, arrival, tg, name)


@dataclass
class CapacityProfile:
    """Profiled tasks-per-slot ``mu[(server, job)]``.

    ``default`` answers pairs missing from the table, which keeps homogeneous
    (mu == 1) examples short.
    """
    mu: dict[tuple[int, int], int] = field(default_factory=dict)
    default: int | None = None

    def get(self, server: int, job_id: int) -> int:
        v = self.mu.get((server, job_id), self.default)
        if v is None:
            raise KeyError(f"no capacity profiled for server {server}, job {job_id}")
        if v < 1:
            raise ValueError(f"capacity for server {server}, job {job_id} must be >= 1, got {v}")
        return v

    def for_job(self, job_id: int, servers: Iterable[int]) -> dict[int, int]:
        return {m: self.get(m, job_id) for m in servers}


@dataclass
class QueueEntry:
    job_id: int
    group_index: int
    remaining_tasks: int


@dataclass
class ClusterSnapshot:
    server_count: int
    queues: Mapping[int, Sequence[QueueEntry]]
    capacity: CapacityProfile

    def queue(self, server: int) -> Sequence[QueueEntry]:
        return self.queues.get(server, ())

    def busy_time(self, server: int) -> int:
        from .estimation import busy_time
        return busy_time(self.queue(server), self.capacity, server)

    def busy_times(self, servers: Iterable[int] | None = None) -> dict[int, int]:
        if servers is None:
            servers = range(1, self.server_count + 1)
        return {m: self.busy_time(m) for m in servers}


@dataclass(frozen=True)
class Problem:
    """A single assignment decision: one job against fixed busy times.

    ``busy`` and ``mu`` cover at least every server some group can use.
    """
    job: Job
    busy: Mapping[int, int]
    mu: Mapping[int, int]

    @classmethod
    def of(cls, job: Job, snapshot: ClusterSnapshot) -> "Problem":
        servers = job.servers
        for m in servers:
            if not 1 <= m <= snapshot.server_count:
                raise InvalidJob(f"job {job.id} references unknown server {m}")
        return cls(job, snapshot.busy_times(servers), snapshot.capacity.for_job(job.id, servers))

    @classmethod
    def build(cls, groups: Iterable[tuple[int, Iterable[int]]], busy: Mapping[int, int] | None = None,
              mu: int | Mapping[int, int] = 1, job_id: int = 0) -> "Problem":
        """Convenience constructor; missing busy entries are 0, scalar ``mu`` applies everywhere."""
        job = Job.build(job_id, groups)
        busy = busy or {}
        b = {m: busy.get(m, 0) for m in job.servers}
        u = {m: (mu if isinstance(mu, int) else mu[m]) for m in job.servers}
        return cls(job, b, u)

    @property
    def groups(self) -> tuple[TaskGroup, ...]:
        return self.job.groups


@dataclass(frozen=True)
class Placement:
    server: int
    slots: int
    tasks: int


@dataclass(frozen=True)
class Assignment:
    """Per-group placements of one job and its estimated completion ``phi``.

    ``allocations`` maps group_index to placements in ascending server order.
    """
    job_id: int
    allocations: Mapping[int, tuple[Placement, ...]]
    phi: int

    def tasks_by_server(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for places in self.allocations.values():
            for p in places:
                out[p.server] = out.get(p.server, 0) + p.tasks
        return out

    def slots_by_server(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for places in self.allocations.values():
            for p in places:
                out[p.server] = out.get(p.server, 0) + p.slots
        return out

    def task_counts(self) -> dict[tuple[int, int], int]:
        """``{(group_index, server): tasks}`` for every non-empty placement."""
        return {(k, p.server): p.tasks for k, places in self.allocations.items() for p in places if p.tasks}


def group_tasks(tasks: Iterable[tuple[Hashable, Iterable[int]]], job_id: int = 0) -> list[TaskGroup]:
    """Partition ``(task_id, available_servers)`` pairs by identical server set.

    Groups come out in order of first appearance of their server set.
    """
    counts: dict[tuple[int, ...], int] = {}
    for task_id, servers in tasks:
        key = tuple(sorted(set(servers)))
        if not key:
            raise InvalidJob(f"task {task_id!r} of job {job_id} has no available server")
        counts[key] = counts.get(key, 0) + 1
    return [TaskGroup(job_id, k, n, s) for k, (s, n) in enumerate(counts.items(), start=1)]


def validate_assignment(job: Job, problem: Problem | ClusterSnapshot, assignment: Assignment) -> str | None:
    """Return ``None`` if ``assignment`` is a valid plan for ``job``, else the first violation.

    Checks group coverage, locality, per-placement slot capacity and that
    every server's slots fit below ``phi`` given its busy time.
    """
    if isinstance(problem, ClusterSnapshot):
        problem = Problem.of(job, problem)
    known = {g.group_index: g for g in job.groups}
    for k in assignment.allocations:
        if k not in known:
            return f"group coverage: unknown group {k}"
    for g in job.groups:
        places = assignment.allocations.get(g.group_index, ())
        total = 0
        for p in places:
            if p.server not in g.available_servers:
                return f"locality: group {g.group_index} placed on server {p.server}"
            if p.tasks < 0 or p.slots < 0:
                return f"slots: negative placement {p} in group {g.group_index}"
            if p.tasks > 0 and p.slots < 1:
                return f"slots: group {g.group_index} has tasks but no slot on server {p.server}"
            if p.tasks > p.slots * problem.mu[p.server]:
                return f"capacity: group {g.group_index} puts {p.tasks} tasks in {p.slots} slots on server {p.server}"
            total += p.tasks
        if total != g.task_count:
            return f"group coverage: group {g.group_index} covers {total} of {g.task_count} tasks"
    for m, s in assignment.slots_by_server().items():
        if s and problem.busy[m] + s > assignment.phi:
            return f"makespan: server {m} needs {problem.busy[m] + s} slots > phi {assignment.phi}"
    return None

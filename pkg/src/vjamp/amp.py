"""Asymmetric big.LITTLE platform model, detection task graph and schedulers.

The simulator is a small discrete-event list scheduler.  Tasks never
migrate or get preempted; a core runs one task at a time.  Durations are
``work / speed(cluster)`` stretched by a synchronisation term that grows
with the number of cores busy when the task starts::

    duration = work / speed * (1 + sync_overhead * (busy_cores - 1))

Energy integrates per-core busy and idle power over ``[0, makespan]`` at
the cluster's current frequency (DVFS is per cluster, never per core).
"""

from __future__ import annotations

import heapq
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .detector import DetectParams, candidate_xs
from .imaging import pyramid_dims

POLICIES = ("botlev", "fifo_asym", "big_only_sequential", "all_cores_fifo")
DEFAULT_PLATFORM_FILE = Path(__file__).with_name("data") / "odroid_xu4.cfg"


class GraphError(ValueError):
    pass


class PlatformError(ValueError):
    pass


# ---------------------------------------------------------------------------
# platform


@dataclass(frozen=True)
class CoreSpec:
    """One cluster's core type.

    ``rate`` is the speed in work units per second at ``ref_mhz``; speed is
    linear in frequency.
    """

    cluster: str
    freq_levels: tuple[int, ...]
    rate: float
    ref_mhz: int

    def speed(self, mhz: int) -> float:
        if mhz not in self.freq_levels:
            raise PlatformError(f"{self.cluster}: {mhz} MHz is not an available level {self.freq_levels}")
        return self.rate * mhz / self.ref_mhz


@dataclass(frozen=True)
class PlatformModel:
    clusters: Mapping[str, CoreSpec]
    counts: Mapping[str, int]
    freqs: Mapping[str, int]
    power_table: Mapping[tuple[str, int], tuple[float, float]]
    sync_overhead: float = 0.0
    name: str = "platform"

    def __post_init__(self):
        for cl, spec in self.clusters.items():
            if self.counts.get(cl, 0) < 0:
                raise PlatformError(f"{cl}: negative core count")
            if self.freqs.get(cl) not in spec.freq_levels:
                raise PlatformError(f"{cl}: current frequency {self.freqs.get(cl)} not in {spec.freq_levels}")
            for f in spec.freq_levels:
                busy, idle = self.power_table.get((cl, f), (None, None))
                if busy is None:
                    raise PlatformError(f"missing power row for {cl} at {f} MHz")
                if not busy >= idle >= 0:
                    raise PlatformError(f"power.{cl}.{f}: need busy >= idle >= 0")
        if self.sync_overhead < 0:
            raise PlatformError("sync overhead must be >= 0")

    @property
    def cores(self) -> list[str]:
        """Cluster of every core, big cores first; the index is the core id."""
        order = sorted(self.clusters, key=lambda c: (c != "big", c))
        return [cl for cl in order for _ in range(self.counts.get(cl, 0))]

    def speed(self, cluster: str) -> float:
        return self.clusters[cluster].speed(self.freqs[cluster])

    def power(self, cluster: str) -> tuple[float, float]:
        return self.power_table[(cluster, self.freqs[cluster])]

    def with_freqs(self, **freqs: int) -> "PlatformModel":
        for cl, f in freqs.items():
            if cl not in self.clusters:
                raise PlatformError(f"unknown cluster {cl!r}")
            if f not in self.clusters[cl].freq_levels:
                raise PlatformError(f"{cl}: {f} MHz is not an available level {self.clusters[cl].freq_levels}")
        return replace(self, freqs={**self.freqs, **freqs})

    def with_overhead(self, c: float) -> "PlatformModel":
        return replace(self, sync_overhead=c)


def parse_platform(text: str, name: str = "platform") -> PlatformModel:
    """Parse the ``key = value`` platform description.

    Recognised keys::

        cluster.<c>.cores = 4
        cluster.<c>.freqs = 800, 1000, 1500, 2000
        cluster.<c>.rate = 2.4e7
        cluster.<c>.ref_mhz = 2000
        freq.<c> = 2000
        power.<c>.<mhz> = <busy W>, <idle W>
        sync.overhead = 0.25
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PlatformError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        raw[k] = v
    try:
        names = sorted({k.split(".")[1] for k in raw if k.startswith("cluster.")})
        clusters, counts, freqs, power = {}, {}, {}, {}
        for cl in names:
            levels = tuple(sorted(int(t) for t in raw[f"cluster.{cl}.freqs"].split(",")))
            clusters[cl] = CoreSpec(cl, levels, float(raw[f"cluster.{cl}.rate"]), int(raw[f"cluster.{cl}.ref_mhz"]))
            counts[cl] = int(raw[f"cluster.{cl}.cores"])
            freqs[cl] = int(raw.get(f"freq.{cl}", max(levels)))
        for k, v in raw.items():
            if k.startswith("power."):
                _, cl, mhz = k.split(".")
                busy, idle = (float(t) for t in v.split(","))
                power[(cl, int(mhz))] = (busy, idle)
        c = float(raw.get("sync.overhead", "0"))
    except KeyError as e:
        raise PlatformError(f"missing key {e.args[0]}") from None
    except ValueError as e:
        raise PlatformError(f"bad value: {e}") from None
    return PlatformModel(clusters, counts, freqs, power, c, name)


def load_platform(path=None) -> PlatformModel:
    path = Path(path) if path is not None else DEFAULT_PLATFORM_FILE
    return parse_platform(path.read_text(encoding="utf-8"), name=path.stem)


def default_platform() -> PlatformModel:
    """4 big + 4 LITTLE at 2000/1400 MHz, calibrated to 3.0 W / 6.85 W."""
    return load_platform(DEFAULT_PLATFORM_FILE)


def rpi_platform() -> PlatformModel:
    """Symmetric 4-core preset calibrated to 2.5 W sequential / 5.5 W parallel."""
    return load_platform(DEFAULT_PLATFORM_FILE.with_name("rpi3.cfg"))


# ---------------------------------------------------------------------------
# task graph


@dataclass(frozen=True)
class TaskNode:
    id: int
    kind: str
    work: float
    deps: tuple[int, ...] = ()
    level: int = -1


@dataclass
class TaskGraph:
    nodes: dict[int, TaskNode] = field(default_factory=dict)

    def add(self, kind: str, work: float, deps: Iterable[int] = (), level: int = -1) -> int:
        if work < 0:
            raise GraphError("task work must be >= 0")
        tid = len(self.nodes)
        deps = tuple(deps)
        for d in deps:
            if d not in self.nodes:
                raise GraphError(f"unknown dependency {d}")
        self.nodes[tid] = TaskNode(tid, kind, float(work), deps, level)
        return tid

    def __len__(self):
        return len(self.nodes)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(d, n.id) for n in self.nodes.values() for d in n.deps]

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {i: [] for i in self.nodes}
        for a, b in self.edges:
            succ[a].append(b)
        return succ

    def topo_order(self) -> list[int]:
        indeg = {i: len(n.deps) for i, n in self.nodes.items()}
        succ = self.successors()
        ready = [i for i, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        out = []
        while ready:
            i = heapq.heappop(ready)
            out.append(i)
            for s in succ[i]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    heapq.heappush(ready, s)
        if len(out) != len(self.nodes):
            raise GraphError("task graph has a cycle")
        return out

    def to_dot(self) -> str:
        buf = io.StringIO()
        buf.write("digraph detection {\n")
        for n in self.nodes.values():
            buf.write(f'  t{n.id} [label="{n.kind} {n.id}\\nL{n.level} w={n.work:.0f}"];\n')
        for a, b in self.edges:
            buf.write(f"  t{a} -> t{b};\n")
        buf.write("}\n")
        return buf.getvalue()


def build_detection_dag(width: int, height: int, p: DetectParams | None = None, block: int = 8,
                        evals_per_window: float = 20.0, raw_rate: float = 1e-3,
                        window: int = 24) -> TaskGraph:
    """Task graph of one detection run.

    Per pyramid level: a downscale task (level 0 copies nothing, so its
    work is 0), an integral task and one scan task per ``block`` candidate
    columns; one reduce task joins every scan.  Work is counted in weak
    evaluations, pixel visits for the image passes and raw hits (times an
    assumed quadratic grouping cost) for the reduce.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    p = p or DetectParams()
    g = TaskGraph()
    scans = []
    total_windows = 0
    min_side = max(p.min_window, window)
    for k, lw, lh, _ in pyramid_dims(width, height, p.scale_factor, min_side, min_side):
        ds = g.add("downscale", 0.0 if k == 0 else lw * lh, (), k)
        it = g.add("integral", 2.0 * lw * lh, (ds,), k)
        xs = candidate_xs(lw, window, p.step)
        rows = len(range(0, lh - window + 1, p.step))
        for b0 in range(0, len(xs), block):
            n_win = len(xs[b0 : b0 + block]) * rows
            total_windows += n_win
            scans.append(g.add("scan_block", n_win * evals_per_window, (it,), k))
    raw = total_windows * raw_rate
    g.add("reduce", max(1.0, raw * raw), scans, -1)
    return g


def dag_counts(width: int, height: int, p: DetectParams | None = None, block: int = 8, window: int = 24):
    """Closed-form ``(nodes, edges)`` of :func:`build_detection_dag`."""
    p = p or DetectParams()
    n_nodes = n_edges = 0
    min_side = max(p.min_window, window)
    for _, lw, _, _ in pyramid_dims(width, height, p.scale_factor, min_side, min_side):
        cols = (lw - window) // p.step + 1
        blocks = -(-cols // block)
        n_nodes += 2 + blocks
        n_edges += 1 + 2 * blocks  # downscale->integral, integral->scan, scan->reduce
    return n_nodes + 1, n_edges


def exec_time(work: float, platform: PlatformModel, cluster: str) -> float:
    return work / platform.speed(cluster)


def bottom_levels(g: TaskGraph, platform: PlatformModel, reference_freq: int | None = None) -> dict[int, float]:
    """Longest remaining path (seconds on a big core) from each task to the end."""
    big = "big" if "big" in platform.clusters else next(iter(platform.clusters))
    if reference_freq is not None:
        platform = platform.with_freqs(**{big: reference_freq})
    succ = g.successors()
    bl: dict[int, float] = {}
    for t in reversed(g.topo_order()):
        own = exec_time(g.nodes[t].work, platform, big)
        bl[t] = own + max((bl[s] for s in succ[t]), default=0.0)
    return bl


# ---------------------------------------------------------------------------
# simulation


@dataclass
class ScheduleResult:
    policy: str
    assignment: dict[int, int]
    start: dict[int, float]
    finish: dict[int, float]
    makespan: float
    queue_trace: list[tuple[float, str, int, int]]
    core_clusters: list[str]
    freqs: dict[str, int]

    def busy_seconds(self) -> list[float]:
        busy = [0.0] * len(self.core_clusters)
        for t, c in self.assignment.items():
            busy[c] += self.finish[t] - self.start[t]
        return busy


def _critical_tie(a: float, b: float) -> bool:
    return a >= b - 1e-12 * max(1.0, abs(b))


def simulate_schedule(g: TaskGraph, platform: PlatformModel, policy: str = "botlev",
                      steal: bool = False, replay: Sequence[tuple[float, str, int, int]] | None = None
                      ) -> ScheduleResult:
    """Event-driven list scheduling of ``g`` on ``platform``.

    Policies:

    ``botlev``
        Two ready queues.  A task is critical when its bottom level equals
        the largest bottom level among ready tasks at the instant it
        becomes ready.  Big cores serve the critical queue first, LITTLE
        cores only the non-critical one (unless ``steal``).
    ``fifo_asym``
        One FIFO queue; free big cores are served before LITTLE ones.
    ``all_cores_fifo``
        One FIFO queue; the core idle the longest goes first, blind to
        the core type.
    ``big_only_sequential``
        Everything on core 0 (a big core) in topological order.

    ``replay`` forces the start order and core choice recorded in an
    earlier trace.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {POLICIES}")
    cores = platform.cores
    if policy == "big_only_sequential":
        cores = cores[:1]
    if not cores:
        raise PlatformError("platform has no cores")
    if policy == "botlev" and not ("big" in cores and any(c != "big" for c in cores)):
        raise PlatformError("botlev needs at least one big and one LITTLE core")
    n_cores = len(cores)
    bl = bottom_levels(g, platform)
    succ = g.successors()
    remaining = {i: len(n.deps) for i, n in g.nodes.items()}
    speed = {cl: platform.speed(cl) for cl in set(cores)}

    crit: list[tuple[float, int]] = []  # heaps keyed by (-bl, id)
    noncrit: list[tuple[float, int]] = []
    fifo: list[int] = []
    seq = 0
    ready_bl: dict[int, float] = {}

    free_since = [0.0] * n_cores
    busy = [False] * n_cores
    events: list[tuple[float, int, int]] = []  # (finish time, task id, core)
    assignment, start, finish = {}, {}, {}
    trace: list[tuple[float, str, int, int]] = []
    replay_plan = [e for e in replay if e[1] == "start"] if replay is not None else None
    replay_pos = 0

    def enqueue(tasks: list[int], now: float):
        nonlocal seq
        tasks = sorted(tasks)
        for t in tasks:
            ready_bl[t] = bl[t]
        top = max(ready_bl.values()) if ready_bl else 0.0
        for t in tasks:
            if policy == "botlev":
                if _critical_tie(bl[t], top):
                    heapq.heappush(crit, (-bl[t], t))
                    trace.append((now, "ready_critical", t, -1))
                else:
                    heapq.heappush(noncrit, (-bl[t], t))
                    trace.append((now, "ready", t, -1))
            else:
                fifo.append(t)
                trace.append((now, "ready", t, -1))
        seq += len(tasks)

    def pick(core: int) -> int | None:
        cl = cores[core]
        if policy == "botlev":
            if cl == "big":
                q = crit if crit else noncrit
            else:
                q = noncrit if noncrit else (crit if steal else None)
            if not q:
                return None
            return heapq.heappop(q)[1]
        if fifo:
            return fifo.pop(0)
        return None

    def idle_order() -> list[int]:
        idle = [c for c in range(n_cores) if not busy[c]]
        if policy == "all_cores_fifo":
            return sorted(idle, key=lambda c: (free_since[c], c))
        return sorted(idle, key=lambda c: (cores[c] != "big", c))

    def dispatch(now: float):
        nonlocal replay_pos
        started = []
        if replay_plan is not None:
            while replay_pos < len(replay_plan) and abs(replay_plan[replay_pos][0] - now) <= 1e-12 * max(1, now):
                _, _, t, c = replay_plan[replay_pos]
                if busy[c] or t not in ready_bl:
                    break
                _remove_ready(t)
                busy[c] = True
                started.append((t, c))
                replay_pos += 1
        else:
            for c in idle_order():
                t = pick(c)
                if t is None:
                    continue
                del ready_bl[t]
                busy[c] = True
                started.append((t, c))
        n_busy_cl: dict[str, int] = {}
        for c in range(n_cores):
            if busy[c]:
                n_busy_cl[cores[c]] = n_busy_cl.get(cores[c], 0) + 1
        n_busy = sum(n_busy_cl.values())
        stretch = 1.0 + platform.sync_overhead * (n_busy - 1)
        for t, c in started:
            dur = g.nodes[t].work / speed[cores[c]] * stretch
            assignment[t], start[t], finish[t] = c, now, now + dur
            heapq.heappush(events, (now + dur, t, c))
            trace.append((now, "start", t, c))

    def _remove_ready(t):
        del ready_bl[t]
        for q in (crit, noncrit):
            for i, (_, u) in enumerate(q):
                if u == t:
                    q.pop(i)
                    heapq.heapify(q)
                    return
        if t in fifo:
            fifo.remove(t)

    now = 0.0
    enqueue([i for i, d in remaining.items() if d == 0], now)
    dispatch(now)
    while events:
        now = events[0][0]
        newly = []
        while events and events[0][0] == now:
            _, t, c = heapq.heappop(events)
            busy[c] = False
            free_since[c] = now
            trace.append((now, "finish", t, c))
            for s in succ[t]:
                remaining[s] -= 1
                if remaining[s] == 0:
                    newly.append(s)
        if newly:
            enqueue(newly, now)
        dispatch(now)
    if len(finish) != len(g.nodes):
        raise GraphError("simulation stalled; the graph has a cycle")
    makespan = max(finish.values(), default=0.0)
    freqs = {cl: platform.freqs[cl] for cl in platform.clusters}
    return ScheduleResult(policy, assignment, start, finish, makespan, trace, list(cores), freqs)


def check_schedule(g: TaskGraph, s: ScheduleResult, tol: float = 1e-9) -> list[str]:
    """Dependency and core-exclusivity violations (empty when valid)."""
    problems = []
    for a, b in g.edges:
        if s.finish[a] > s.start[b] + tol:
            problems.append(f"task {b} starts at {s.start[b]} before dependency {a} ends at {s.finish[a]}")
    per_core: dict[int, list[tuple[float, float, int]]] = {}
    for t, c in s.assignment.items():
        per_core.setdefault(c, []).append((s.start[t], s.finish[t], t))
    for c, spans in per_core.items():
        spans.sort()
        for (s0, f0, t0), (s1, f1, t1) in zip(spans, spans[1:]):
            if s1 < f0 - tol:
                problems.append(f"core {c} runs tasks {t0} and {t1} at once")
    if set(s.assignment) != set(g.nodes):
        problems.append("not every task was scheduled")
    return problems


# ---------------------------------------------------------------------------
# energy


@dataclass(frozen=True)
class EnergyReport:
    cluster_joules: dict[str, float]
    busy_joules: dict[str, float]
    idle_joules: dict[str, float]
    total_joules: float
    avg_watts: float
    makespan: float


def energy_of(s: ScheduleResult, platform: PlatformModel) -> EnergyReport:
    """Busy and idle energy of every core of ``platform`` over ``[0, makespan]``.

    Cores the policy left unused (for example the other seven cores in a
    sequential run) still draw idle power for the whole makespan.
    """
    busy_s = s.busy_seconds()
    all_cores = platform.cores
    busy_j = {cl: 0.0 for cl in platform.clusters}
    idle_j = {cl: 0.0 for cl in platform.clusters}
    for c, cl in enumerate(all_cores):
        b = busy_s[c] if c < len(busy_s) else 0.0
        p_busy, p_idle = platform.power_table[(cl, s.freqs.get(cl, platform.freqs[cl]))]
        busy_j[cl] += b * p_busy
        idle_j[cl] += max(0.0, s.makespan - b) * p_idle
    per = {cl: busy_j[cl] + idle_j[cl] for cl in platform.clusters}
    total = sum(per.values())
    avg = total / s.makespan if s.makespan > 0 else 0.0
    return EnergyReport(per, busy_j, idle_j, total, avg, s.makespan)


# ---------------------------------------------------------------------------
# DVFS sweep


@dataclass
class SweepRecord:
    policy: str
    big_mhz: int
    little_mhz: int
    step: int
    scale: float
    makespan_s: float
    joules: float
    avg_w: float
    total_error: int | None = None
    fp: int | None = None
    fn: int | None = None
    elapsed_s: float | None = None
    windows_scanned: int | None = None
    pareto: bool = False
    selected: bool = False

    def __post_init__(self):
        if self.fp is not None and self.fn is not None:
            if self.total_error is None:
                self.total_error = self.fp + self.fn
            elif self.total_error != self.fp + self.fn:
                raise ValueError("total_error must equal fp + fn")


CSV_HEADER = "policy,big_mhz,little_mhz,step,scale,makespan_s,joules,avg_w,total_error"
CSV_EXTRA = ",fp,fn,elapsed_s,windows_scanned,pareto,selected"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def records_to_csv(records: Sequence[SweepRecord], extra: bool = True) -> str:
    lines = [CSV_HEADER + (CSV_EXTRA if extra else "")]
    for r in records:
        cols = [r.policy, r.big_mhz, r.little_mhz, r.step, r.scale, r.makespan_s, r.joules, r.avg_w, r.total_error]
        if extra:
            cols += [r.fp, r.fn, r.elapsed_s, r.windows_scanned, r.pareto, r.selected]
        lines.append(",".join(_fmt(c) for c in cols))
    return "\n".join(lines) + "\n"


def mark_pareto(records: Sequence[SweepRecord], slack: float = 1.25) -> SweepRecord | None:
    """Flag the (makespan, joules) frontier and select the cheapest record
    whose makespan is within ``slack`` times the best one."""
    for r in records:
        r.pareto = not any(
            (o.makespan_s <= r.makespan_s and o.joules <= r.joules)
            and (o.makespan_s < r.makespan_s or o.joules < r.joules)
            for o in records
        )
        r.selected = False
    if not records:
        return None
    best = min(r.makespan_s for r in records)
    ok = [r for r in records if r.makespan_s <= slack * best * (1 + 1e-12)]
    pick = min(ok, key=lambda r: (r.joules, r.makespan_s))
    pick.selected = True
    return pick


def dvfs_sweep(g: TaskGraph, platform: PlatformModel, big_freqs: Sequence[int], little_freq: int | None = None,
               policies: Sequence[str] = ("botlev",), step: int = 1, scale: float = 1.2,
               slack: float = 1.25) -> list[SweepRecord]:
    """Simulate every (big frequency, policy) pair and flag the selection."""
    little = "little"
    if little_freq is None:
        little_freq = platform.freqs.get(little, 0)
    for f in big_freqs:
        if f not in platform.clusters["big"].freq_levels:
            raise ValueError(f"big cluster has no {f} MHz level")
    if little in platform.clusters and little_freq not in platform.clusters[little].freq_levels:
        raise ValueError(f"LITTLE cluster has no {little_freq} MHz level")
    records = []
    for f in big_freqs:
        freqs = {"big": f}
        if little in platform.clusters:
            freqs[little] = little_freq
        plat = platform.with_freqs(**freqs)
        for pol in policies:
            s = simulate_schedule(g, plat, pol)
            e = energy_of(s, plat)
            records.append(SweepRecord(pol, f, little_freq, step, scale, s.makespan, e.total_joules, e.avg_watts))
    mark_pareto(records, slack)
    return records


def parallel_detect_bridge(img, cascade, p: DetectParams | None = None, platform_workers: int | None = None,
                           platform: PlatformModel | None = None, policy: str = "botlev"):
    """Run the real detector and pair it with the simulated run.

    Returns ``(report, record)``; ``record.elapsed_s`` is the measured wall
    time and ``record.makespan_s`` the model's prediction for the same
    image, so their ratio can be inspected (it is not expected to match).
    """
    import os

    from .detector import detect

    p = p or DetectParams()
    workers = platform_workers or os.cpu_count() or 1
    report = detect(img, cascade, p, workers=workers)
    platform = platform or default_platform()
    evals = report.weak_evals / report.windows_scanned if report.windows_scanned else 20.0
    g = build_detection_dag(img.width, img.height, p, evals_per_window=evals)
    s = simulate_schedule(g, platform, policy)
    e = energy_of(s, platform)
    rec = SweepRecord(policy, platform.freqs.get("big", 0), platform.freqs.get("little", 0), p.step,
                      p.scale_factor, s.makespan, e.total_joules, e.avg_watts, elapsed_s=report.elapsed,
                      windows_scanned=report.windows_scanned)
    return report, rec


def schedule_csv(s: ScheduleResult, g: TaskGraph) -> str:
    lines = ["task,kind,core,cluster,start_s,finish_s"]
    for t in sorted(s.assignment):
        c = s.assignment[t]
        lines.append(f"{t},{g.nodes[t].kind},{c},{s.core_clusters[c]},{s.start[t]:.9g},{s.finish[t]:.9g}")
    return "\n".join(lines) + "\n"


def energy_csv(rows: Sequence[tuple[str, ScheduleResult, EnergyReport]]) -> str:
    lines = ["policy,big_mhz,little_mhz,makespan_s,joules,avg_w"]
    for pol, s, e in rows:
        lines.append(
            f"{pol},{s.freqs.get('big', '')},{s.freqs.get('little', '')},{s.makespan:.6g},{e.total_joules:.6g},{e.avg_watts:.6g}"
        )
    return "\n".join(lines) + "\n"


def solve_calibration(p_seq: float, p_par: float, n_big: int, n_little: int, idle_ratio: float) -> tuple[float, float]:
    """Per-core busy power ``(big, little)`` so that one busy big core plus
    idle others draws ``p_seq`` and all cores busy draw ``p_par``."""
    # p_seq = B + idle*( (n_big-1) B + n_little L );  p_par = n_big B + n_little L
    a1, b1 = 1 + idle_ratio * (n_big - 1), idle_ratio * n_little
    a2, b2 = n_big, n_little
    det = a1 * b2 - a2 * b1
    if n_little == 0 or math.isclose(det, 0.0):
        raise ValueError("calibration is singular for this core mix")
    big = (p_seq * b2 - p_par * b1) / det
    little = (a1 * p_par - a2 * p_seq) / det
    return big, little


def random_layered_dag(rng, n_tasks: int, max_layers: int = 4, max_deps: int = 2,
                       work_range: tuple[float, float] = (1e6, 1e7)) -> TaskGraph:
    """Random layered DAG; each non-source task depends on earlier layers only."""
    n_layers = int(rng.integers(1, max_layers + 1))
    cuts = sorted(int(v) for v in rng.choice(range(1, n_tasks), size=min(n_layers - 1, n_tasks - 1), replace=False)) if n_tasks > 1 else []
    layer_of = []
    bounds = [0] + cuts + [n_tasks]
    for li in range(len(bounds) - 1):
        layer_of += [li] * (bounds[li + 1] - bounds[li])
    g = TaskGraph()
    for t in range(n_tasks):
        earlier = [u for u in range(t) if layer_of[u] < layer_of[t]]
        deps = ()
        if earlier:
            k = int(rng.integers(1, min(max_deps, len(earlier)) + 1))
            deps = tuple(sorted(int(u) for u in rng.choice(earlier, size=k, replace=False)))
        g.add("task", float(rng.uniform(*work_range)), deps)
    return g

"""Simulated device-edge wireless link.

Bandwidth is a piecewise-constant trace over episode time, with optional
crash windows during which the edge is unreachable regardless of the trace.
A heartbeat probe samples the link once per interval; decisions made between
probes therefore act on slightly stale estimates, which is intentional and
covered by tests.

A transfer of n bytes started at time t costs n*8 / bandwidth_at(t) seconds;
bandwidth is read once at the start of the transfer.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BeforeTraceStart, NoProbeYet, SchemaError

DEFAULT_PROBE_INTERVAL = 1.0  # seconds between heartbeat probes


@dataclass(frozen=True)
class BandwidthSample:
    """Bandwidth from time ``t`` onward; ``bw`` is bits/second, None = down."""

    t: float
    bw: float | None

    def __post_init__(self):
        if self.bw is not None and self.bw <= 0:
            raise SchemaError(f"bandwidth at t={self.t} must be > 0 or down")


@dataclass(frozen=True)
class TransferEstimate:
    """A transfer-time estimate; ``delta_t`` is None when the link is down."""

    delta_t: float | None
    estimated_at: float
    payload_bytes: int

    @property
    def infeasible(self) -> bool:
        return self.delta_t is None

    def seconds_for(self, payload_bytes: int) -> float | None:
        """Scale this estimate to a different payload size."""
        if self.delta_t is None:
            return None
        if self.payload_bytes == 0:
            return 0.0
        return self.delta_t * payload_bytes / self.payload_bytes


@dataclass
class LinkTrace:
    samples: list[BandwidthSample]
    crash_windows: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.samples:
            raise SchemaError("trace must contain at least one sample")
        times = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SchemaError("trace samples must be strictly increasing in t")
        windows = sorted(self.crash_windows)
        for (s1, e1), (s2, _) in zip(windows, windows[1:]):
            if s2 < e1:
                raise SchemaError("crash windows must be disjoint")
        for s, e in windows:
            if e <= s:
                raise SchemaError(f"crash window [{s}, {e}) is empty or inverted")
        self.crash_windows = windows
        self._times = times

    def in_crash_window(self, t: float) -> bool:
        for start, end in self.crash_windows:
            if start <= t < end:
                return True
        return False

    def next_crash_in(self, start: float, end: float) -> float | None:
        """Earliest instant in [start, end) at which the edge is unreachable."""
        if self.in_crash_window(start):
            return start
        for ws, _ in self.crash_windows:
            if start < ws < end:
                return ws
        return None


def constant_trace(bw: float, crash_windows: list[tuple[float, float]] | None = None) -> LinkTrace:
    return LinkTrace([BandwidthSample(0.0, bw)], crash_windows or [])


def bandwidth_at(trace: LinkTrace, t: float) -> float | None:
    """Bandwidth in effect at time ``t``; None while the edge is unreachable.

    A sample boundary belongs to the new segment. Crash windows win over
    whatever the trace says.
    """
    if t < trace._times[0]:
        raise BeforeTraceStart(f"t={t} precedes first sample at {trace._times[0]}")
    if trace.in_crash_window(t):
        return None
    idx = bisect.bisect_right(trace._times, t) - 1
    return trace.samples[idx].bw


def transfer_time(trace: LinkTrace, payload_bytes: int, t: float) -> float | None:
    """Seconds to move ``payload_bytes`` starting at ``t``; None if down."""
    if payload_bytes < 0:
        raise ValueError("payload_bytes must be >= 0")
    bw = bandwidth_at(trace, t)
    if bw is None:
        return None
    if payload_bytes == 0:
        return 0.0
    return payload_bytes * 8 / bw


def heartbeat_estimate(
    trace: LinkTrace,
    t: float,
    probe_interval: float = DEFAULT_PROBE_INTERVAL,
    probe_bytes: int = 1,
) -> TransferEstimate:
    """Estimate from the most recent probe tick at or before ``t``.

    Probes fire at 0, interval, 2*interval, ...; between ticks the estimate
    is held, so it can lag the true bandwidth by up to one interval.
    """
    if probe_interval <= 0:
        raise ValueError("probe_interval must be > 0")
    if t < 0:
        raise NoProbeYet(f"no heartbeat probe before t={t}")
    probe_t = math.floor(t / probe_interval) * probe_interval
    probe_t = max(probe_t, trace._times[0])
    delta = transfer_time(trace, probe_bytes, probe_t)
    return TransferEstimate(delta_t=delta, estimated_at=probe_t, payload_bytes=probe_bytes)


# --- persistence ------------------------------------------------------------


def trace_to_csv(trace: LinkTrace) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["t_seconds", "bandwidth_bps"])
    for s in trace.samples:
        writer.writerow([repr(s.t), "down" if s.bw is None else repr(s.bw)])
    for start, end in trace.crash_windows:
        out.write(f"#crash,{start!r},{end!r}\r\n")
    return out.getvalue()


def trace_from_csv(text: str) -> LinkTrace:
    samples: list[BandwidthSample] = []
    crash_windows: list[tuple[float, float]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line.lstrip("#").split(",")
            if parts[0].strip().lower() != "crash" or len(parts) != 3:
                raise SchemaError(f"line {line_no}: bad directive {line!r}")
            crash_windows.append((float(parts[1]), float(parts[2])))
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0].lower() in ("t_seconds", "t"):
            continue  # header row
        if len(parts) != 2:
            raise SchemaError(f"line {line_no}: expected t,bandwidth")
        bw = None if parts[1].lower() == "down" else float(parts[1])
        samples.append(BandwidthSample(float(parts[0]), bw))
    return LinkTrace(samples, crash_windows)


def save_trace(trace: LinkTrace, path: str | Path) -> None:
    Path(path).write_text(trace_to_csv(trace))


def load_trace(path: str | Path) -> LinkTrace:
    return trace_from_csv(Path(path).read_text())


# --- distance-driven traces ---------------------------------------------------


def load_distance_table(text: str) -> list[tuple[float, float]]:
    """Parse `meters,bandwidth_bps` rows into a sorted bucket table."""
    table: list[tuple[float, float]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0].lower() in ("meters", "m"):
            continue
        if len(parts) != 2:
            raise SchemaError(f"line {line_no}: expected meters,bandwidth")
        table.append((float(parts[0]), float(parts[1])))
    if not table:
        raise SchemaError("distance table is empty")
    return sorted(table)


def bandwidth_for_distance(table: list[tuple[float, float]], meters: float) -> float:
    """Bucketed lookup: bandwidth of the largest bucket <= meters."""
    chosen = table[0][1]
    for bucket, bw in table:
        if meters >= bucket:
            chosen = bw
        else:
            break
    return chosen


def trace_from_walk(
    walk: list[tuple[float, float]],
    table: list[tuple[float, float]],
    sample_dt: float = 0.5,
) -> LinkTrace:
    """Map a walk path (time, meters) onto a bandwidth trace.

    Distance is interpolated linearly between waypoints and sampled every
    ``sample_dt`` seconds; consecutive equal bandwidths are merged.
    """
    if len(walk) < 1:
        raise SchemaError("walk needs at least one waypoint")
    walk = sorted(walk)
    t_end = walk[-1][0]
    samples: list[BandwidthSample] = []
    t = walk[0][0]
    while t <= t_end + 1e-9:
        meters = _walk_distance(walk, t)
        bw = bandwidth_for_distance(table, meters)
        if not samples or samples[-1].bw != bw:
            samples.append(BandwidthSample(round(t, 9), bw))
        t += sample_dt
    return LinkTrace(samples)


def _walk_distance(walk: list[tuple[float, float]], t: float) -> float:
    if t <= walk[0][0]:
        return walk[0][1]
    for (t0, d0), (t1, d1) in zip(walk, walk[1:]):
        if t0 <= t <= t1:
            if t1 == t0:
                return d1
            return d0 + (d1 - d0) * (t - t0) / (t1 - t0)
    return walk[-1][1]

"""Episode catalog, seeded episode generation, and the runner that executes
baseline vs. cached serving and produces run reports.

An episode is an ordered sequence of asynchronously arriving speech (S),
vitals (V), and image (I) payloads. The bundled catalog holds the three
reference arrival sequences used throughout the latency experiments: episode 1
is speech first, then ten vitals, then ten images; episodes 2 and 3 are fixed
shuffles of the same multiset with speech arriving 8th and 19th respectively.

Cumulative inference time is the sum of per-event user latencies; arrival
offsets matter only for bandwidth-trace lookups, never for the metric itself.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ConfigError, UnknownEpisode
from .models import (
    COST_KIND,
    HEADER_KIND,
    Modality,
    ModelFamily,
    default_family,
    eval_monolithic,
)
from .netlink import LinkTrace
from .profiling import LatencyProfile
from .scheduler import CachePolicy, Placement, ServeResult, Session

DEFAULT_PAYLOAD_BYTES = {"S": 480_000, "V": 1_000, "I": 1_500_000}

_MODALITY_OF_CODE = {"S": Modality.TEXT, "V": Modality.VITALS, "I": Modality.IMAGE}
_KIND_OF_CODE = {"S": "speech", "V": "vitals", "I": "image"}

_BUILTIN_SEQUENCES = {
    1: "S" + "V" * 10 + "I" * 10,
    2: "IVIVIVISVIVIIVVIVVIVI",
    3: "VVVVVVIIIIIIVIVVIISVI",
}


@dataclass(frozen=True)
class ArrivalEvent:
    index: int  # 1-based position in the episode
    modality: str  # "S" | "V" | "I"
    payload_id: str
    payload_bytes: int
    arrival_offset: float
    payload_version: int = 0

    def __post_init__(self):
        if self.modality not in _MODALITY_OF_CODE:
            raise ConfigError(f"event {self.index}: modality must be S, V or I")
        if self.payload_bytes < 0 or self.arrival_offset < 0:
            raise ConfigError(f"event {self.index}: negative payload size or offset")

    @property
    def modality_enum(self) -> Modality:
        return _MODALITY_OF_CODE[self.modality]


@dataclass(frozen=True)
class Episode:
    episode_id: str
    events: tuple[ArrivalEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.events:
            raise ConfigError(f"{self.episode_id}: episode has no events")
        for pos, event in enumerate(self.events, start=1):
            if event.index != pos:
                raise ConfigError(f"{self.episode_id}: indices must be contiguous from 1")
        ids = [e.payload_id for e in self.events]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"{self.episode_id}: payload_ids must be unique")

    def modality_counts(self) -> dict[str, int]:
        return dict(Counter(e.modality for e in self.events))


def _event(index: int, code: str, payload_bytes: dict[str, int] | None = None) -> ArrivalEvent:
    sizes = payload_bytes or DEFAULT_PAYLOAD_BYTES
    return ArrivalEvent(
        index=index,
        modality=code,
        payload_id=f"{_KIND_OF_CODE[code]}-{index:02d}",
        payload_bytes=sizes[code],
        arrival_offset=float(index - 1),  # 1 Hz arrivals by default
    )


def episode_from_codes(
    episode_id: str, codes: str, payload_bytes: dict[str, int] | None = None
) -> Episode:
    events = tuple(_event(i, c, payload_bytes) for i, c in enumerate(codes, start=1))
    return Episode(episode_id=episode_id, events=events)


def builtin_episode(n: int, payload_bytes: dict[str, int] | None = None) -> Episode:
    """One of the three bundled arrival sequences (1, 2 or 3)."""
    try:
        codes = _BUILTIN_SEQUENCES[n]
    except KeyError:
        raise UnknownEpisode(f"no bundled episode {n!r}; choose 1, 2 or 3") from None
    return episode_from_codes(f"episode-{n}", codes, payload_bytes)


def shuffled_episode(base: Episode, seed: int) -> Episode:
    """Deterministic permutation of ``base`` with renumbered indices."""
    rng = random.Random(seed)
    order = list(base.events)
    rng.shuffle(order)
    events = tuple(
        ArrivalEvent(
            index=i,
            modality=e.modality,
            payload_id=e.payload_id,
            payload_bytes=e.payload_bytes,
            arrival_offset=float(i - 1),
            payload_version=e.payload_version,
        )
        for i, e in enumerate(order, start=1)
    )
    return Episode(episode_id=f"{base.episode_id}-shuffle-{seed}", events=events)


def generate_episode(
    seed: int,
    max_vitals: int = 30,
    max_images: int = 10,
    payload_bytes: dict[str, int] | None = None,
) -> Episode:
    """Random episode with one speech payload, 1..max_vitals vitals and
    0..max_images images, in a seed-deterministic order."""
    rng = random.Random(seed)
    codes = ["S"] + ["V"] * rng.randint(1, max_vitals) + ["I"] * rng.randint(0, max_images)
    rng.shuffle(codes)
    return episode_from_codes(f"gen-{seed}", "".join(codes), payload_bytes)


# --- episode files ------------------------------------------------------------


def parse_episode_file(text: str, episode_id: str = "custom") -> Episode:
    """One event per line: ``modality[,payload_bytes[,arrival_offset_s]]``."""
    events = []
    index = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        code = parts[0].upper()
        if code not in _MODALITY_OF_CODE:
            raise ConfigError(f"line {line_no}: modality must be S, V or I")
        index += 1
        size = int(parts[1]) if len(parts) > 1 and parts[1] else DEFAULT_PAYLOAD_BYTES[code]
        offset = float(parts[2]) if len(parts) > 2 and parts[2] else float(index - 1)
        events.append(
            ArrivalEvent(
                index=index,
                modality=code,
                payload_id=f"{_KIND_OF_CODE[code]}-{index:02d}",
                payload_bytes=size,
                arrival_offset=offset,
            )
        )
    return Episode(episode_id=episode_id, events=tuple(events))


def episode_to_file(episode: Episode) -> str:
    lines = [f"{e.modality},{e.payload_bytes},{e.arrival_offset!r}" for e in episode.events]
    return "\n".join(lines) + "\n"


# --- clocks -------------------------------------------------------------------


class VirtualClock:
    """Deterministic simulated time; nothing sleeps."""

    def __init__(self):
        self.now = 0.0

    def advance_to(self, t: float) -> None:
        self.now = max(self.now, t)

    def spend(self, seconds: float) -> None:
        self.now += seconds


class WallClock:
    """Demo pacing: really sleeps, scaled. Reports stay identical to the
    virtual clock's; only presentation timing changes."""

    def __init__(self, scale: float = 0.01):
        self.scale = scale
        self.now = 0.0

    def advance_to(self, t: float) -> None:
        self.now = max(self.now, t)

    def spend(self, seconds: float) -> None:
        self.now += seconds
        time.sleep(max(0.0, seconds * self.scale))


# --- run reports --------------------------------------------------------------


class RunMode(str, Enum):
    BASELINE = "baseline"
    EMSSERVE = "emsserve"


@dataclass(frozen=True)
class EventRecord:
    index: int
    modality: str
    placement: str
    latency_s: float
    cumulative_s: float
    recommendation: int | None  # None while pending


@dataclass(frozen=True)
class RunReport:
    mode: str
    episode_id: str
    per_event: tuple[EventRecord, ...]
    total_s: float
    config_fingerprint: str

    def recommendations(self) -> list[int | None]:
        return [r.recommendation for r in self.per_event]


@dataclass
class RunConfig:
    profile: LatencyProfile
    device: str = "glass"
    edge: str = "edge-4c"
    trace: LinkTrace | None = None
    clock: str = "virtual"  # "virtual" | "wall"
    wall_scale: float = 0.01
    policy: CachePolicy = field(default_factory=CachePolicy)
    offload_enabled: bool = False
    probe_interval: float = 1.0
    seed: int | None = None
    session_id: str = "default"
    family: ModelFamily | None = None

    def resolved_family(self) -> ModelFamily:
        return self.family if self.family is not None else default_family()

    def validate(self) -> None:
        if self.clock not in ("virtual", "wall"):
            raise ConfigError(f"unknown clock {self.clock!r}")
        if self.offload_enabled and self.trace is None:
            raise ConfigError("offloading enabled but no link trace configured")

    def fingerprint(self, episode: Episode) -> str:
        family = self.resolved_family()
        doc = {
            "episode": episode.episode_id,
            "events": [[e.index, e.modality, e.payload_bytes, e.arrival_offset] for e in episode.events],
            "device": self.device,
            "edge": self.edge,
            "offload": self.offload_enabled,
            "parallel_threshold": self.policy.parallel_threshold,
            "probe_interval": self.probe_interval,
            "clock": self.clock,
            "seed": self.seed,
            "session": self.session_id,
            "profile": sorted((m, d, s) for (m, d), s in self.profile.entries.items()),
            "trace": None
            if self.trace is None
            else {
                "samples": [[s.t, s.bw] for s in self.trace.samples],
                "crash": self.trace.crash_windows,
            },
            "family": [
                [m.model_id, m.n_classes, [[e.module_id, e.modality.label, e.feature_dim] for e in m.encoders]]
                for m in family
            ],
        }
        raw = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(raw).hexdigest()[:16]


@dataclass
class Instrumentation:
    """Side-channel counters for property tests, not part of the report."""

    exec_counts: Counter = field(default_factory=Counter)
    max_device_staleness: int = 0
    crash_fallbacks: int = 0

    def encoder_runs(self, modality: Modality | None = None, host: str | None = None) -> int:
        total = 0
        for (run_host, module_id, _payload, _ver), n in self.exec_counts.items():
            if host is not None and run_host != host:
                continue
            if modality is not None and not _module_matches(module_id, modality):
                continue
            total += n
        return total


def _module_matches(module_id: str, modality: Modality) -> bool:
    suffix = {"T": Modality.TEXT, "V": Modality.VITALS, "I": Modality.IMAGE}
    tail = module_id.rsplit("_", 1)[-1]
    return suffix.get(tail) == modality


def run(episode: Episode, mode: RunMode | str, config: RunConfig) -> RunReport:
    report, _ = run_with_instrumentation(episode, mode, config)
    return report


def run_with_instrumentation(
    episode: Episode, mode: RunMode | str, config: RunConfig
) -> tuple[RunReport, Instrumentation]:
    mode = RunMode(mode)
    config.validate()
    clock = VirtualClock() if config.clock == "virtual" else WallClock(config.wall_scale)
    fingerprint = config.fingerprint(episode)
    if mode == RunMode.EMSSERVE:
        records, instr = _run_emsserve(episode, config, clock)
    else:
        records, instr = _run_baseline(episode, config, clock)
    total = records[-1].cumulative_s if records else 0.0
    report = RunReport(
        mode=mode.value,
        episode_id=episode.episode_id,
        per_event=tuple(records),
        total_s=total,
        config_fingerprint=fingerprint,
    )
    return report, instr


def _run_emsserve(episode, config, clock):
    session = Session(
        config.resolved_family(),
        config.profile,
        device=config.device,
        edge=config.edge,
        trace=config.trace,
        offload_enabled=config.offload_enabled,
        policy=config.policy,
        session_id=config.session_id,
        probe_interval=config.probe_interval,
    )
    records: list[EventRecord] = []
    cumulative = 0.0
    for event in episode.events:
        clock.advance_to(event.arrival_offset)
        result: ServeResult = session.serve(event)
        clock.spend(result.user_latency)
        cumulative += result.user_latency
        records.append(
            EventRecord(
                index=event.index,
                modality=event.modality,
                placement=result.placement.value,
                latency_s=result.user_latency,
                cumulative_s=cumulative,
                recommendation=None if result.pending else result.recommendation.class_index,
            )
        )
    instr = Instrumentation(
        exec_counts=Counter(session.exec_counts),
        max_device_staleness=session.max_device_staleness,
        crash_fallbacks=session.crash_fallbacks,
    )
    return records, instr


def _run_baseline(episode, config, clock):
    """Direct-framework semantics: every arrival re-encodes every observed
    modality from scratch; the largest fully observed model's header runs on
    top. No caches, no offloading."""
    family = config.resolved_family()
    profile = config.profile
    device = config.device
    observed: dict[Modality, tuple[str, int]] = {}
    instr = Instrumentation()
    records: list[EventRecord] = []
    cumulative = 0.0
    for event in episode.events:
        clock.advance_to(event.arrival_offset)
        observed[event.modality_enum] = (event.payload_id, event.payload_version)
        active = family.active_model(set(observed))
        latency = 0.0
        for modality, (payload_id, version) in sorted(observed.items()):
            if active is not None and active.has_modality(modality):
                encoder = active.encoder_for(modality)
            else:
                encoder = family.anchor_model(modality).encoder_for(modality)
            latency += profile.resolve((encoder.module_id, COST_KIND[modality]), device)
            instr.exec_counts[(device, encoder.module_id, payload_id, version)] += 1
        recommendation = None
        if active is not None:
            latency += profile.resolve((active.header_id, HEADER_KIND), device)
            payloads = {q: observed[q] for q in active.modalities}
            recommendation = eval_monolithic(active, payloads).class_index
        clock.spend(latency)
        cumulative += latency
        records.append(
            EventRecord(
                index=event.index,
                modality=event.modality,
                placement=Placement.LOCAL.value,
                latency_s=latency,
                cumulative_s=cumulative,
                recommendation=recommendation,
            )
        )
    return records, instr


def load_episode(path: str | Path, episode_id: str | None = None) -> Episode:
    p = Path(path)
    return parse_episode_file(p.read_text(), episode_id or p.stem)

"""Per-module, per-device latency measurement and storage.

Profiles are built once offline (or loaded from presets) and consulted at
serving time by the offload scheduler. A missing key is an explicit miss,
never an implicit zero: silent zeros would bias offloading toward modules
that were simply never measured.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import InvalidArgs, ProfileMiss, SchemaError

DEFAULT_TOTAL_RUNS = 15
DEFAULT_KEEP_LAST = 10


@dataclass
class LatencyProfile:
    """Map of (module or model id, device) -> seconds. Immutable by convention
    once built; share freely across threads."""

    entries: dict[tuple[str, str], float] = field(default_factory=dict)

    def set(self, module: str, device: str, seconds: float) -> None:
        if not math.isfinite(seconds) or seconds < 0:
            raise SchemaError(f"latency for ({module}, {device}) must be finite and >= 0")
        self.entries[(module, device)] = float(seconds)

    def lookup(self, module: str, device: str) -> float:
        try:
            return self.entries[(module, device)]
        except KeyError:
            raise ProfileMiss(f"no latency for module {module!r} on device {device!r}") from None

    def resolve(self, candidates: Iterable[str], device: str) -> float:
        """First hit along a key chain (e.g. concrete module id, then its
        generic cost class). Raises ProfileMiss if none match."""
        tried = []
        for key in candidates:
            tried.append(key)
            value = self.entries.get((key, device))
            if value is not None:
                return value
        raise ProfileMiss(f"no latency for any of {tried} on device {device!r}")

    def devices(self) -> list[str]:
        return sorted({dev for _, dev in self.entries})


def measure(
    runner: Callable[[], float | None],
    total_runs: int = DEFAULT_TOTAL_RUNS,
    keep_last: int = DEFAULT_KEEP_LAST,
) -> float:
    """Invoke ``runner`` ``total_runs`` times and average the last ``keep_last``
    durations, discarding warm-up runs (cold starts, JIT, page faults).

    ``runner`` may return its own duration in seconds (scripted/virtual mode,
    used by deterministic tests); returning None means "time me", in which
    case a monotonic wall clock is used.
    """
    if keep_last < 1 or total_runs < keep_last:
        raise InvalidArgs(f"need total_runs >= keep_last >= 1, got {total_runs}, {keep_last}")
    durations = []
    for _ in range(total_runs):
        start = time.perf_counter()
        reported = runner()
        elapsed = time.perf_counter() - start
        durations.append(float(reported) if reported is not None else elapsed)
    tail = durations[-keep_last:]
    return math.fsum(tail) / keep_last


def profile_store_save(profile: LatencyProfile, path: str | Path) -> None:
    devices: dict[str, dict[str, float]] = {}
    for (module, device), seconds in sorted(profile.entries.items()):
        devices.setdefault(device, {})[module] = seconds
    doc = {"schema": 1, "devices": devices}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def profile_store_load(path: str | Path) -> LatencyProfile:
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid profile JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("profile file must be a JSON object")
    devices = doc.get("devices", {k: v for k, v in doc.items() if k != "schema"})
    profile = LatencyProfile()
    for device, modules in devices.items():
        if not isinstance(modules, dict):
            raise SchemaError(f"device {device!r}: expected an object of module latencies")
        for module, seconds in modules.items():
            if not isinstance(seconds, (int, float)) or not math.isfinite(seconds) or seconds < 0:
                raise SchemaError(f"({module}, {device}): latency must be finite and >= 0")
            profile.set(module, device, float(seconds))
    return profile


def lookup(profile: LatencyProfile, module: str, device: str) -> float:
    return profile.lookup(module, device)


# --- presets -----------------------------------------------------------------

# Measured magnitudes for a small object detector across the four bench
# devices; the >100x glass-vs-big-edge spread is what makes offloading pay.
_DETECTOR_BENCH = {
    "glass": {"image-detector": 3.2},
    "ph1": {"image-detector": 0.7},
    "edge-4c": {"image-detector": 0.08},
    "edge-64x": {"image-detector": 0.03},
}

# Single-device synthetic profile with a dominant text module; drives the
# closed-form episode oracles.
_SYNTHETIC_GLASS = {
    "glass": {"text": 1.0, "vitals": 0.001, "image": 0.1, "header": 0.001},
}

# Four-device profiles scaled from the bench magnitudes above. Text dominates
# (speech-to-text plus text encoder), vitals and headers are tiny, image sits
# in between; each device keeps a text:image ratio of roughly 6-7x.
_DEVICE_BENCH = {
    "glass": {"text": 12.0, "vitals": 0.008, "image": 2.0, "header": 0.004},
    "ph1": {"text": 4.8, "vitals": 0.004, "image": 0.7, "header": 0.002},
    "edge-4c": {"text": 0.56, "vitals": 0.0008, "image": 0.08, "header": 0.0004},
    "edge-64x": {"text": 0.21, "vitals": 0.0003, "image": 0.03, "header": 0.0002},
}

PRESETS: dict[str, dict[str, dict[str, float]]] = {
    "detector-bench": _DETECTOR_BENCH,
    "synthetic-glass": _SYNTHETIC_GLASS,
    "device-bench": _DEVICE_BENCH,
}


def preset_profile(name: str) -> LatencyProfile:
    try:
        table = PRESETS[name]
    except KeyError:
        raise SchemaError(f"unknown profile preset: {name!r}") from None
    profile = LatencyProfile()
    for device, modules in table.items():
        for module, seconds in modules.items():
            profile.set(module, device, seconds)
    return profile

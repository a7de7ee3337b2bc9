"""Versioned per-host store of encoder output features.

One live entry per (model, modality, session) key, latest step wins. Entries
are immutable once published and publication is atomic per key, so readers
never observe torn data. The store also tracks the last step whose features
it has fully ingested, which is what the fault-tolerance staleness bound is
stated against.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass

from .errors import VersionRegression
from .models import FeatureVector, Modality, fnv1a_64


@dataclass(frozen=True)
class CacheKey:
    model_id: str
    modality: Modality
    session_id: str = "default"


@dataclass(frozen=True)
class CacheEntry:
    key: CacheKey
    features: FeatureVector
    step_version: int
    payload_id: str

    def checksum(self) -> str:
        raw = struct.pack(f"<{len(self.features.values)}d", *self.features.values)
        return f"{fnv1a_64(raw):016x}"


class CacheStore:
    """Per-host feature cache; safe for concurrent readers with one writer."""

    def __init__(self, host: str):
        self.host = host
        self._entries: dict[CacheKey, CacheEntry] = {}
        self._lock = threading.Lock()
        self.last_synced_step = 0

    def put(self, entry: CacheEntry) -> None:
        with self._lock:
            existing = self._entries.get(entry.key)
            if existing is not None and entry.step_version < existing.step_version:
                raise VersionRegression(
                    f"{entry.key}: step {entry.step_version} < cached {existing.step_version}"
                )
            self._entries[entry.key] = entry

    def get(self, key: CacheKey) -> CacheEntry | None:
        with self._lock:
            return self._entries.get(key)

    def find_feature(
        self,
        model_id: str,
        modality: Modality,
        payload_id: str,
        payload_version: int,
        session_id: str = "default",
    ) -> CacheEntry | None:
        """Entry holding features for exactly this payload, preferring the
        exact model key but accepting any sibling model's entry (encoders of
        one modality share outputs for identical payloads)."""
        with self._lock:
            exact = self._entries.get(CacheKey(model_id, modality, session_id))
            if (
                exact is not None
                and exact.payload_id == payload_id
                and exact.features.payload_version == payload_version
            ):
                return exact
            for key, entry in self._entries.items():
                if (
                    key.modality == modality
                    and key.session_id == session_id
                    and entry.payload_id == payload_id
                    and entry.features.payload_version == payload_version
                ):
                    return entry
        return None

    def mark_synced(self, step: int) -> None:
        if step < self.last_synced_step:
            raise VersionRegression(f"sync step {step} < {self.last_synced_step}")
        self.last_synced_step = step

    def staleness(self, global_step: int) -> int:
        if global_step < self.last_synced_step:
            raise ValueError("global_step precedes last synced step")
        return global_step - self.last_synced_step

    def dump(self) -> list[dict]:
        """Debug snapshot for test assertions."""
        with self._lock:
            entries = sorted(
                self._entries.values(),
                key=lambda e: (e.key.model_id, e.key.modality, e.key.session_id),
            )
            return [
                {
                    "model_id": e.key.model_id,
                    "modality": e.key.modality.label,
                    "step_version": e.step_version,
                    "feature_checksum": e.checksum(),
                }
                for e in entries
            ]

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def cache_put(store: CacheStore, entry: CacheEntry) -> None:
    store.put(entry)


def cache_get(store: CacheStore, key: CacheKey) -> CacheEntry | None:
    return store.get(key)


def staleness(store: CacheStore, global_step: int) -> int:
    return store.staleness(global_step)


def entry_bytes(features: FeatureVector, envelope: int = 64) -> int:
    """Serialized size of one cache entry: 8 bytes per element plus envelope."""
    return 8 * len(features.values) + envelope

"""Per-arrival orchestration: offload decision, encoder execution with cache
reuse, sibling cache precomputation, edge-to-device cache sync, and crash
fallback.

Execution is planned as a pure cost/effect description first and committed to
the cache stores afterwards. That makes edge crashes exact: a crashed attempt
leaves no trace on either host, and the local fallback re-plans from committed
state only.

Latency folding follows the profiled cost of each sibling cache module:
expensive ones run concurrently with the primary path (contribution = max),
cheap ones run serially (contributions add). The arriving payload's upload and
the returned-cache download are charged on edge placements, but the offload
decision itself compares only upload + edge compute against local compute.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .cache import CacheEntry, CacheKey, CacheStore, entry_bytes
from .errors import ConfigError, ProfileMiss, UnservableModule
from .models import (
    COST_KIND,
    HEADER_KIND,
    EncoderSpec,
    Modality,
    ModelFamily,
    ModelSpec,
    Recommendation,
    classify,
    eval_encoder,
)
from .netlink import (
    DEFAULT_PROBE_INTERVAL,
    LinkTrace,
    TransferEstimate,
    heartbeat_estimate,
    transfer_time,
)
from .profiling import LatencyProfile

RESULT_ENVELOPE_BYTES = 64  # recommendation payload returned from the edge


class Placement(str, Enum):
    LOCAL = "local"
    EDGE = "edge"


class DecisionReason(str, Enum):
    RULE_FAVORS_EDGE = "rule-favors-edge"
    RULE_FAVORS_LOCAL = "rule-favors-local"
    TIE = "tie"
    EDGE_DOWN = "edge-down"
    PROFILE_MISS = "profile-miss"
    OFFLOAD_DISABLED = "offload-disabled"


@dataclass(frozen=True)
class OffloadDecision:
    placement: Placement
    predicted_local: float
    predicted_edge: float | None
    reason: DecisionReason


@dataclass(frozen=True)
class CachePolicy:
    """Sibling cache modules costing at least the threshold run in parallel
    with the primary path; cheaper ones run serially."""

    parallel_threshold: float = 0.010

    def __post_init__(self):
        if self.parallel_threshold <= 0:
            raise ValueError("parallel_threshold must be > 0")


@dataclass(frozen=True)
class ServeResult:
    recommendation: Recommendation | None  # None while no model is fully observed
    user_latency: float
    decision: OffloadDecision
    placement: Placement  # effective; differs from decision on crash fallback
    caches_written: tuple[CacheKey, ...]
    step: int

    @property
    def pending(self) -> bool:
        return self.recommendation is None


def decide(
    module_cost_key: str | tuple[str, ...],
    payload_bytes: int,
    profile: LatencyProfile,
    link_estimate: TransferEstimate | None,
    device: str = "glass",
    edge: str = "edge-4c",
) -> OffloadDecision:
    """Place the arriving work unit: edge iff upload + edge compute beats the
    on-device time, ties stay local, and an unreachable edge or unprofiled
    edge module forces local."""
    keys = (module_cost_key,) if isinstance(module_cost_key, str) else tuple(module_cost_key)
    try:
        t_local = profile.resolve(keys, device)
    except ProfileMiss as exc:
        raise UnservableModule(str(exc)) from exc

    if link_estimate is None:
        return OffloadDecision(Placement.LOCAL, t_local, None, DecisionReason.OFFLOAD_DISABLED)
    if link_estimate.infeasible:
        return OffloadDecision(Placement.LOCAL, t_local, None, DecisionReason.EDGE_DOWN)
    try:
        t_edge = profile.resolve(keys, edge)
    except ProfileMiss:
        return OffloadDecision(Placement.LOCAL, t_local, None, DecisionReason.PROFILE_MISS)

    upload = link_estimate.seconds_for(payload_bytes)
    predicted_edge = upload + t_edge
    if predicted_edge < t_local:
        return OffloadDecision(Placement.EDGE, t_local, predicted_edge, DecisionReason.RULE_FAVORS_EDGE)
    if predicted_edge == t_local:
        return OffloadDecision(Placement.LOCAL, t_local, predicted_edge, DecisionReason.TIE)
    return OffloadDecision(Placement.LOCAL, t_local, predicted_edge, DecisionReason.RULE_FAVORS_LOCAL)


def accounted_latency(
    placement: Placement,
    primary_cost: float,
    parallel_costs: tuple[float, ...] = (),
    serial_costs: tuple[float, ...] = (),
    upload_s: float = 0.0,
    download_s: float = 0.0,
) -> float:
    """Explicit latency accounting: parallel cache work folds into a max with
    the primary path, serial work adds, transfers bracket edge compute."""
    compute = max((primary_cost, *parallel_costs)) + sum(serial_costs)
    if placement == Placement.LOCAL:
        return compute
    return upload_s + compute + download_s


@dataclass
class _ExecPlan:
    """Pure description of one step's work on one host; committed on success."""

    host: str
    latency: float
    recommendation: Recommendation | None
    entries: list[CacheEntry]
    executions: list[tuple[str, str, str, int]]  # (host, module_id, payload_id, version)


@dataclass
class _EdgeAttempt:
    crashed: bool
    wasted: float = 0.0
    latency: float = 0.0
    recommendation: Recommendation | None = None
    caches_written: tuple[CacheKey, ...] = ()


class Session:
    """State of one serving session on a device, optionally edge-assisted."""

    def __init__(
        self,
        family: ModelFamily,
        profile: LatencyProfile,
        *,
        device: str = "glass",
        edge: str = "edge-4c",
        trace: LinkTrace | None = None,
        offload_enabled: bool = False,
        policy: CachePolicy | None = None,
        session_id: str = "default",
        probe_interval: float = DEFAULT_PROBE_INTERVAL,
    ):
        if offload_enabled and trace is None:
            raise ConfigError("offloading enabled but no link trace provided")
        self.family = family
        self.profile = profile
        self.device = device
        self.edge = edge
        self.trace = trace
        self.offload_enabled = offload_enabled
        self.policy = policy or CachePolicy()
        self.session_id = session_id
        self.probe_interval = probe_interval
        self.device_store = CacheStore(device)
        self.edge_store = CacheStore(edge)
        self.observed: dict[Modality, tuple[str, int]] = {}
        self.exec_counts: Counter = Counter()
        self.max_device_staleness = 0
        self.crash_fallbacks = 0

    # -- helpers -------------------------------------------------------------

    def _encoder_cost(self, encoder: EncoderSpec, host_device: str) -> float:
        chain = (encoder.module_id, COST_KIND[encoder.modality])
        try:
            return self.profile.resolve(chain, host_device)
        except ProfileMiss as exc:
            raise UnservableModule(str(exc)) from exc

    def _header_cost(self, model: ModelSpec, host_device: str) -> float:
        try:
            return self.profile.resolve((model.header_id, HEADER_KIND), host_device)
        except ProfileMiss as exc:
            raise UnservableModule(str(exc)) from exc

    def _plan(
        self,
        store: CacheStore,
        host_device: str,
        active: ModelSpec | None,
        anchor: ModelSpec,
        modality: Modality,
        step: int,
    ) -> _ExecPlan:
        payload_id, version = self.observed[modality]
        primary_enc = anchor.encoder_for(modality)
        primary_cost = self._encoder_cost(primary_enc, host_device)

        # Sibling-model caches for the arriving modality; skipped while no
        # model is fully observed (only the arriving encoder runs then).
        step_encoders: list[tuple[ModelSpec, EncoderSpec]] = [(anchor, primary_enc)]
        if active is not None:
            for m in self.family.models_with(modality):
                if m.model_id != anchor.model_id:
                    step_encoders.append((m, m.encoder_for(modality)))

        parallel: list[float] = []
        serial: list[float] = []
        for _, enc in step_encoders[1:]:
            cost = self._encoder_cost(enc, host_device)
            (parallel if cost >= self.policy.parallel_threshold else serial).append(cost)

        entries: list[CacheEntry] = []
        executions: list[tuple[str, str, str, int]] = []
        for owner, enc in step_encoders:
            feature = eval_encoder(enc, payload_id, version)
            executions.append((host_device, enc.module_id, payload_id, version))
            entries.append(
                CacheEntry(
                    key=CacheKey(owner.model_id, modality, self.session_id),
                    features=feature,
                    step_version=step,
                    payload_id=payload_id,
                )
            )

        recommendation = None
        header_cost = 0.0
        recompute: list[float] = []
        if active is not None:
            for q in active.modalities:
                if q == modality and active.has_modality(modality):
                    continue  # produced by this step's encoder runs
                q_payload, q_version = self.observed[q]
                hit = store.find_feature(active.model_id, q, q_payload, q_version, self.session_id)
                if hit is None:
                    # Not on this host (e.g. first offload after local steps):
                    # recompute from the recorded payload, serially.
                    enc = active.encoder_for(q)
                    recompute.append(self._encoder_cost(enc, host_device))
                    executions.append((host_device, enc.module_id, q_payload, q_version))
                    entries.append(
                        CacheEntry(
                            key=CacheKey(active.model_id, q, self.session_id),
                            features=eval_encoder(enc, q_payload, q_version),
                            step_version=step,
                            payload_id=q_payload,
                        )
                    )
            header_cost = self._header_cost(active, host_device)
            recommendation = Recommendation(
                class_index=classify(active, {q: self.observed[q] for q in active.modalities}),
                model_id=active.model_id,
                step=step,
            )

        latency = accounted_latency(
            Placement.LOCAL,
            primary_cost,
            tuple(parallel),
            tuple(serial) + tuple(recompute) + ((header_cost,) if active is not None else ()),
        )
        return _ExecPlan(
            host=host_device,
            latency=latency,
            recommendation=recommendation,
            entries=entries,
            executions=executions,
        )

    def _commit(self, plan: _ExecPlan, *stores: CacheStore) -> None:
        for store in stores:
            for entry in plan.entries:
                store.put(entry)
        self.exec_counts.update(plan.executions)

    # -- the serve step --------------------------------------------------------

    def serve(self, event) -> ServeResult:
        """Process one arrival: decide placement, run/reuse encoders, keep all
        sibling caches warm, and always yield a result even if the edge dies
        mid-step."""
        step = event.index
        t = event.arrival_offset
        modality = event.modality_enum
        self.observed[modality] = (event.payload_id, event.payload_version)

        active = self.family.active_model(set(self.observed))
        if active is not None and active.has_modality(modality):
            anchor = active
        else:
            anchor = self.family.anchor_model(modality)
        primary_enc = anchor.encoder_for(modality)
        cost_chain = (primary_enc.module_id, COST_KIND[modality])

        if self.offload_enabled:
            estimate = heartbeat_estimate(self.trace, t, self.probe_interval)
            decision = decide(
                cost_chain, event.payload_bytes, self.profile, estimate, self.device, self.edge
            )
        else:
            decision = decide(cost_chain, event.payload_bytes, self.profile, None, self.device, self.edge)

        placement = decision.placement
        caches_written: tuple[CacheKey, ...] = ()
        recommendation = None
        latency = 0.0
        wasted = 0.0

        if placement == Placement.EDGE:
            result = self._try_edge(active, anchor, modality, step, t, event.payload_bytes)
            if result.crashed:
                placement = Placement.LOCAL  # seamless on-device fallback
                wasted = result.wasted
            else:
                latency = result.latency
                recommendation = result.recommendation
                caches_written = result.caches_written
        if placement == Placement.LOCAL:
            plan = self._plan(self.device_store, self.device, active, anchor, modality, step)
            self._commit(plan, self.device_store)
            latency = wasted + plan.latency
            recommendation = plan.recommendation
            caches_written = tuple(e.key for e in plan.entries)

        self.device_store.mark_synced(step)
        self.max_device_staleness = max(self.max_device_staleness, self.device_store.staleness(step))
        return ServeResult(
            recommendation=recommendation,
            user_latency=latency,
            decision=decision,
            placement=placement,
            caches_written=caches_written,
            step=step,
        )

    def _try_edge(self, active, anchor, modality, step, t, payload_bytes) -> "_EdgeAttempt":
        """Attempt the step on the edge.

        The work is planned (pure) before anything is committed, so a crash,
        whether at upload, compute, or the return leg, leaves no state on
        either host; the caller re-plans locally from committed caches.
        """
        upload = transfer_time(self.trace, payload_bytes, t)
        if upload is None:
            return self._crash(step, wasted=0.0)

        plan = self._plan(self.edge_store, self.edge, active, anchor, modality, step)
        compute_done = t + upload + plan.latency
        crash_at = self.trace.next_crash_in(t, compute_done)
        if crash_at is not None:
            # Edge died during upload or compute; burn time until the onset.
            return self._crash(step, wasted=max(0.0, crash_at - t))
        download_bytes = RESULT_ENVELOPE_BYTES + sum(entry_bytes(e.features) for e in plan.entries)
        download = transfer_time(self.trace, download_bytes, compute_done)
        if download is None:
            return self._crash(step, wasted=upload + plan.latency)
        crash_at = self.trace.next_crash_in(compute_done, compute_done + download)
        if crash_at is not None:
            return self._crash(step, wasted=max(0.0, crash_at - t))

        # Success: edge publishes locally and the device ingests every cache
        # entry computed on the edge this step before the step completes.
        self._commit(plan, self.edge_store, self.device_store)
        self.edge_store.mark_synced(step)
        return _EdgeAttempt(
            crashed=False,
            latency=upload + plan.latency + download,
            recommendation=plan.recommendation,
            caches_written=tuple(e.key for e in plan.entries),
        )

    def _crash(self, step: int, wasted: float) -> "_EdgeAttempt":
        self.crash_fallbacks += 1
        self.max_device_staleness = max(
            self.max_device_staleness, self.device_store.staleness(step)
        )
        return _EdgeAttempt(crashed=True, wasted=wasted)

"""Latency-aware serving simulator for multimodal models under asynchronous
input arrival: modality-aware model splitting, versioned feature caching,
heartbeat-driven device/edge offloading with crash fallback, plus clinical
post-processing helpers (edit-distance matching, dose math, disease lookup).
"""

from .cache import CacheEntry, CacheKey, CacheStore, cache_get, cache_put, staleness
from .episodes import (
    ArrivalEvent,
    Episode,
    RunConfig,
    RunMode,
    RunReport,
    builtin_episode,
    generate_episode,
    run,
    run_with_instrumentation,
    shuffled_episode,
)
from .medkit import DoseResult, MedEntry, MedsDictionary, ed_match, levenshtein, med_math
from .metrics import Comparison, export, speedup
from .models import (
    EncoderSpec,
    FeatureVector,
    Modality,
    ModelFamily,
    ModelSpec,
    Recommendation,
    SplitModel,
    default_family,
    eval_encoder,
    eval_header,
    eval_monolithic,
    split,
)
from .netlink import (
    BandwidthSample,
    LinkTrace,
    TransferEstimate,
    bandwidth_at,
    constant_trace,
    heartbeat_estimate,
    transfer_time,
)
from .profiling import LatencyProfile, measure, preset_profile, profile_store_load, profile_store_save
from .scheduler import CachePolicy, OffloadDecision, Placement, ServeResult, Session, decide

__version__ = "0.1.0"

__all__ = [
    "ArrivalEvent",
    "BandwidthSample",
    "CacheEntry",
    "CacheKey",
    "CachePolicy",
    "CacheStore",
    "Comparison",
    "DoseResult",
    "EncoderSpec",
    "Episode",
    "FeatureVector",
    "LatencyProfile",
    "LinkTrace",
    "MedEntry",
    "MedsDictionary",
    "Modality",
    "ModelFamily",
    "ModelSpec",
    "OffloadDecision",
    "Placement",
    "Recommendation",
    "RunConfig",
    "RunMode",
    "RunReport",
    "ServeResult",
    "Session",
    "SplitModel",
    "TransferEstimate",
    "bandwidth_at",
    "builtin_episode",
    "cache_get",
    "cache_put",
    "constant_trace",
    "decide",
    "default_family",
    "ed_match",
    "eval_encoder",
    "eval_header",
    "eval_monolithic",
    "export",
    "generate_episode",
    "heartbeat_estimate",
    "levenshtein",
    "measure",
    "med_math",
    "preset_profile",
    "profile_store_load",
    "profile_store_save",
    "run",
    "run_with_instrumentation",
    "shuffled_episode",
    "speedup",
    "split",
    "staleness",
    "transfer_time",
]

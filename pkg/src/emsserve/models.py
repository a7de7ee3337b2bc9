"""Multimodal model family: declarative specs, the modality-aware splitter,
and a deterministic synthetic evaluator used as the inference backend.

Real encoders and fusion headers are replaced by pure functions: encoder
outputs come from a splitmix-style generator seeded by the payload identity,
and the header classifies by hashing the concatenated feature bytes. Both are
bit-stable across platforms, which makes every downstream latency experiment
reproducible without a numerics dependency.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import lru_cache

from .errors import DimMismatch, MalformedSpec, MissingModality, SchemaError

DEFAULT_CLASS_COUNT = 46  # clinical protocol classes selected by a recommendation


class Modality(IntEnum):
    """Input kinds, totally ordered; the order fixes concatenation layout."""

    TEXT = 0
    VITALS = 1
    IMAGE = 2

    @property
    def label(self) -> str:
        return _MODALITY_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Modality":
        try:
            return _MODALITY_BY_LABEL[label.strip().lower()]
        except KeyError:
            raise SchemaError(f"unknown modality label: {label!r}") from None


_MODALITY_LABELS = {Modality.TEXT: "Text", Modality.VITALS: "Vitals", Modality.IMAGE: "Image"}
_MODALITY_BY_LABEL = {"text": Modality.TEXT, "vitals": Modality.VITALS, "image": Modality.IMAGE}

# Generic profile cost classes, used as fallback keys when a profile is not
# keyed by concrete module ids.
COST_KIND = {Modality.TEXT: "text", Modality.VITALS: "vitals", Modality.IMAGE: "image"}
HEADER_KIND = "header"


class PayloadKind(str, Enum):
    SPEECH = "Speech"
    VITALS_SERIES = "VitalsSeries"
    IMAGE_FRAME = "ImageFrame"


_DEFAULT_PAYLOAD_KIND = {
    Modality.TEXT: PayloadKind.SPEECH,
    Modality.VITALS: PayloadKind.VITALS_SERIES,
    Modality.IMAGE: PayloadKind.IMAGE_FRAME,
}


@dataclass(frozen=True)
class EncoderSpec:
    """One single-modality submodule of a multimodal model."""

    module_id: str
    modality: Modality
    feature_dim: int
    payload_kind: PayloadKind | None = None

    def __post_init__(self):
        if self.feature_dim < 1:
            raise MalformedSpec(f"{self.module_id}: feature_dim must be >= 1")
        if self.payload_kind is None:
            object.__setattr__(self, "payload_kind", _DEFAULT_PAYLOAD_KIND[self.modality])


@dataclass(frozen=True)
class ModelSpec:
    """A multimodal model: per-modality encoders plus one fusion header.

    The header consumes the concatenation of all encoder outputs in fixed
    modality order (Text, Vitals, Image). ``header_inputs`` may declare the
    expected concatenated width; when present it must match the encoder dims.
    """

    model_id: str
    encoders: tuple[EncoderSpec, ...]
    header_id: str
    n_classes: int = DEFAULT_CLASS_COUNT
    header_inputs: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "encoders", tuple(self.encoders))

    @property
    def modalities(self) -> tuple[Modality, ...]:
        return tuple(sorted(e.modality for e in self.encoders))

    def encoder_for(self, modality: Modality) -> EncoderSpec:
        for enc in self.encoders:
            if enc.modality == modality:
                return enc
        raise MissingModality(f"{self.model_id} has no {modality.label} encoder")

    def has_modality(self, modality: Modality) -> bool:
        return any(e.modality == modality for e in self.encoders)

    @property
    def total_feature_dim(self) -> int:
        return sum(e.feature_dim for e in self.encoders)

    def validate(self) -> None:
        if not self.encoders:
            raise MalformedSpec(f"{self.model_id}: no encoders")
        if self.n_classes < 1:
            raise MalformedSpec(f"{self.model_id}: n_classes must be >= 1")
        seen_modalities = set()
        seen_ids = set()
        for enc in self.encoders:
            if enc.modality in seen_modalities:
                raise MalformedSpec(
                    f"{self.model_id}: two encoders share modality {enc.modality.label}"
                )
            if enc.module_id in seen_ids:
                raise MalformedSpec(f"{self.model_id}: duplicate module_id {enc.module_id}")
            seen_modalities.add(enc.modality)
            seen_ids.add(enc.module_id)
        if self.header_inputs is not None and self.header_inputs != self.total_feature_dim:
            raise MalformedSpec(
                f"{self.model_id}: header declares {self.header_inputs} inputs, "
                f"encoders total {self.total_feature_dim}"
            )


@dataclass(frozen=True)
class HeaderLayout:
    """Input contract of a fusion header: modality order and widths."""

    header_id: str
    inputs: tuple[tuple[Modality, int], ...]
    n_classes: int

    @property
    def total_inputs(self) -> int:
        return sum(dim for _, dim in self.inputs)


@dataclass(frozen=True)
class SplitModel:
    """Result of decomposing a model into independent per-modality parts."""

    source_model_id: str
    parts: dict[Modality, EncoderSpec]
    header: HeaderLayout


@dataclass(frozen=True)
class FeatureVector:
    """Output of one encoder run; immutable and safe to share."""

    values: tuple[float, ...]
    producer_module: str
    payload_version: int


@dataclass(frozen=True)
class Recommendation:
    class_index: int
    model_id: str
    step: int = 0


def split(model: ModelSpec) -> SplitModel:
    """Decompose ``model`` into per-modality encoder parts plus a header
    descriptor. Raises MalformedSpec when the model violates its invariants."""
    model.validate()
    parts = {enc.modality: enc for enc in model.encoders}
    inputs = tuple((m, parts[m].feature_dim) for m in sorted(parts))
    header = HeaderLayout(header_id=model.header_id, inputs=inputs, n_classes=model.n_classes)
    return SplitModel(source_model_id=model.model_id, parts=parts, header=header)


def reassemble(split_model: SplitModel) -> ModelSpec:
    """Inverse of :func:`split`; round-trips exactly on well-formed specs."""
    encoders = tuple(split_model.parts[m] for m in sorted(split_model.parts))
    return ModelSpec(
        model_id=split_model.source_model_id,
        encoders=encoders,
        header_id=split_model.header.header_id,
        n_classes=split_model.header.n_classes,
        header_inputs=split_model.header.total_inputs,
    )


# --- deterministic synthetic backend ---------------------------------------

_M64 = (1 << 64) - 1
_FNV_BASIS = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def fnv1a_64(data: bytes, state: int = _FNV_BASIS) -> int:
    """64-bit FNV-1a over ``data``, continuing from ``state``."""
    p = _FNV_PRIME
    for b in data:
        state = ((state ^ b) * p) & _M64
    return state


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _M64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _M64
    return z ^ (z >> 31)


@lru_cache(maxsize=1 << 16)
def _feature_values(modality: Modality, payload_id: str, version: int, dim: int) -> tuple[float, ...]:
    # Seed ignores which model owns the encoder: sibling models' encoders of
    # the same modality produce identical features for identical payloads,
    # which makes cross-model cache reuse well-defined.
    seed = fnv1a_64(f"{modality.label}|{payload_id}|{version}".encode())
    out = []
    state = seed
    scale = 2.0 / (1 << 53)
    for _ in range(dim):
        state = (state + _SPLITMIX_GAMMA) & _M64
        z = _mix64(state)
        out.append((z >> 11) * scale - 1.0)
    return tuple(out)


@lru_cache(maxsize=1 << 16)
def _feature_bytes(modality: Modality, payload_id: str, version: int, dim: int) -> bytes:
    values = _feature_values(modality, payload_id, version, dim)
    return struct.pack(f"<{dim}d", *values)


@lru_cache(maxsize=1 << 18)
def _hash_step(state: int, modality: Modality, payload_id: str, version: int, dim: int) -> int:
    return fnv1a_64(_feature_bytes(modality, payload_id, version, dim), state)


def eval_encoder(encoder: EncoderSpec, payload_id: str, payload_version: int = 0) -> FeatureVector:
    """Run the synthetic encoder: a pure function of (modality, payload).

    Referentially transparent; repeated calls return bit-identical vectors.
    """
    if not payload_id:
        raise ValueError("payload_id must be non-empty")
    values = _feature_values(encoder.modality, payload_id, payload_version, encoder.feature_dim)
    return FeatureVector(values=values, producer_module=encoder.module_id, payload_version=payload_version)


def eval_header(model: ModelSpec, features: dict[Modality, FeatureVector]) -> Recommendation:
    """Fuse per-modality features into a class decision.

    Features are concatenated in fixed modality order and hashed byte-wise
    (FNV-1a over the IEEE-754 little-endian float bytes), so any change to
    values *or order* changes the outcome distributionally.
    """
    model.validate()
    expected = set(model.modalities)
    got = set(features)
    if got != expected:
        missing = ", ".join(m.label for m in sorted(expected - got)) or "-"
        extra = ", ".join(m.label for m in sorted(got - expected)) or "-"
        raise MissingModality(
            f"{model.model_id}: feature map mismatch (missing: {missing}; unexpected: {extra})"
        )
    state = _FNV_BASIS
    for modality in sorted(features):
        vec = features[modality]
        dim = model.encoder_for(modality).feature_dim
        if len(vec.values) != dim:
            raise DimMismatch(
                f"{model.model_id}/{modality.label}: got {len(vec.values)} values, expected {dim}"
            )
        state = fnv1a_64(struct.pack(f"<{dim}d", *vec.values), state)
    return Recommendation(class_index=state % model.n_classes, model_id=model.model_id)


def classify(model: ModelSpec, payloads: dict[Modality, tuple[str, int]]) -> int:
    """Class index for a payload assignment, via the memoized synthetic path.

    Equal to ``eval_header`` over freshly evaluated encoders (property-tested),
    but caches per-feature hash steps so episode sweeps stay fast.
    """
    state = _FNV_BASIS
    for modality in sorted(model.modalities):
        try:
            payload_id, version = payloads[modality]
        except KeyError:
            raise MissingModality(f"{model.model_id}: no payload for {modality.label}") from None
        state = _hash_step(state, modality, payload_id, version, model.encoder_for(modality).feature_dim)
    return state % model.n_classes


def eval_monolithic(model: ModelSpec, payloads: dict[Modality, tuple[str, int]]) -> Recommendation:
    """Reference path: run every encoder fresh, then the header.

    This is the oracle for cache-transparency tests; the cached serving path
    must agree with it bit-for-bit on every payload assignment.
    """
    model.validate()
    return Recommendation(class_index=classify(model, payloads), model_id=model.model_id)


# --- model family -----------------------------------------------------------


@dataclass
class ModelFamily:
    """An ordered set of related models sharing encoder semantics."""

    models: list[ModelSpec] = field(default_factory=list)

    def __post_init__(self):
        ids = [m.model_id for m in self.models]
        if len(set(ids)) != len(ids):
            raise MalformedSpec("duplicate model_id in family")
        for m in self.models:
            m.validate()

    def __iter__(self):
        return iter(self.models)

    def get(self, model_id: str) -> ModelSpec:
        for m in self.models:
            if m.model_id == model_id:
                return m
        raise KeyError(model_id)

    def active_model(self, observed: set[Modality]) -> ModelSpec | None:
        """Largest model whose modalities are all observed; None if no model
        is fully observed yet (e.g. nothing text-anchored has arrived)."""
        best = None
        for m in self.models:
            if set(m.modalities) <= observed:
                if best is None or _family_rank(m) > _family_rank(best):
                    best = m
        return best

    def anchor_model(self, modality: Modality) -> ModelSpec:
        """Largest model containing ``modality``; owns pre-activation encoding."""
        best = None
        for m in self.models:
            if m.has_modality(modality):
                if best is None or _family_rank(m) > _family_rank(best):
                    best = m
        if best is None:
            raise MissingModality(f"no family model consumes {modality.label}")
        return best

    def models_with(self, modality: Modality) -> list[ModelSpec]:
        return [m for m in self.models if m.has_modality(modality)]


def _family_rank(m: ModelSpec) -> tuple[int, str]:
    return (len(m.modalities), m.model_id)


def default_family(n_classes: int = DEFAULT_CLASS_COUNT) -> ModelFamily:
    """The bundled three-model family: text-only, text+vitals, text+vitals+image."""
    text_dim, vitals_dim, image_dim = 512, 32, 16
    m1 = ModelSpec(
        model_id="M1",
        encoders=(EncoderSpec("M1_T", Modality.TEXT, text_dim),),
        header_id="M1_H",
        n_classes=n_classes,
    )
    m2 = ModelSpec(
        model_id="M2",
        encoders=(
            EncoderSpec("M2_T", Modality.TEXT, text_dim),
            EncoderSpec("M2_V", Modality.VITALS, vitals_dim),
        ),
        header_id="M2_H",
        n_classes=n_classes,
    )
    m3 = ModelSpec(
        model_id="M3",
        encoders=(
            EncoderSpec("M3_T", Modality.TEXT, text_dim),
            EncoderSpec("M3_V", Modality.VITALS, vitals_dim),
            EncoderSpec("M3_I", Modality.IMAGE, image_dim),
        ),
        header_id="M3_H",
        n_classes=n_classes,
    )
    return ModelFamily([m1, m2, m3])


# --- serialization ----------------------------------------------------------


def family_to_json(family: ModelFamily) -> str:
    doc = {
        "schema": 1,
        "models": [
            {
                "model_id": m.model_id,
                "header_id": m.header_id,
                "n_classes": m.n_classes,
                "encoders": [
                    {
                        "module_id": e.module_id,
                        "modality": e.modality.label,
                        "feature_dim": e.feature_dim,
                    }
                    for e in sorted(m.encoders, key=lambda e: e.modality)
                ],
            }
            for m in family
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def family_from_json(text: str) -> ModelFamily:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid family JSON: {exc}") from exc
    raw_models = doc["models"] if isinstance(doc, dict) else doc
    models = []
    for raw in raw_models:
        try:
            encoders = tuple(
                EncoderSpec(
                    module_id=e["module_id"],
                    modality=Modality.from_label(e["modality"]),
                    feature_dim=int(e["feature_dim"]),
                )
                for e in raw["encoders"]
            )
            models.append(
                ModelSpec(
                    model_id=raw["model_id"],
                    encoders=encoders,
                    header_id=raw.get("header_id", raw["model_id"] + "_H"),
                    n_classes=int(raw.get("n_classes", DEFAULT_CLASS_COUNT)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"family entry missing key: {exc}") from exc
    return ModelFamily(models)

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emsserve import (
    EncoderSpec,
    Modality,
    ModelSpec,
    default_family,
    eval_encoder,
    eval_header,
    eval_monolithic,
    split,
)
from emsserve.errors import DimMismatch, MalformedSpec, MissingModality
from emsserve.models import FeatureVector, classify, family_from_json, family_to_json, reassemble


def test_split_three_modalities(family):
    sm = split(family.get("M3"))
    assert set(sm.parts) == {Modality.TEXT, Modality.VITALS, Modality.IMAGE}
    assert sm.parts[Modality.TEXT].module_id == "M3_T"
    assert sm.header.total_inputs == 512 + 32 + 16
    assert sm.header.n_classes == 46


def test_split_single_modality(family):
    sm = split(family.get("M1"))
    assert set(sm.parts) == {Modality.TEXT}
    assert sm.header.total_inputs == 512


def test_split_rejects_header_dim_mismatch():
    model = ModelSpec(
        model_id="bad",
        encoders=(
            EncoderSpec("bad_T", Modality.TEXT, 512),
            EncoderSpec("bad_V", Modality.VITALS, 32),
            EncoderSpec("bad_I", Modality.IMAGE, 16),
        ),
        header_id="bad_H",
        header_inputs=544,  # encoders total 560
    )
    with pytest.raises(MalformedSpec):
        split(model)


def test_split_rejects_duplicate_modality():
    model = ModelSpec(
        model_id="dup",
        encoders=(
            EncoderSpec("dup_T1", Modality.TEXT, 8),
            EncoderSpec("dup_T2", Modality.TEXT, 8),
        ),
        header_id="dup_H",
    )
    with pytest.raises(MalformedSpec):
        split(model)


def test_split_parts_carry_exact_encoder_set(family):
    for model in family:
        sm = split(model)
        assert {e.module_id for e in sm.parts.values()} == {e.module_id for e in model.encoders}


@given(
    dims=st.lists(st.integers(min_value=1, max_value=64), min_size=1, max_size=3),
    n_classes=st.integers(min_value=1, max_value=100),
)
def test_split_reassemble_roundtrip(dims, n_classes):
    modalities = [Modality.TEXT, Modality.VITALS, Modality.IMAGE][: len(dims)]
    model = ModelSpec(
        model_id="rt",
        encoders=tuple(
            EncoderSpec(f"rt_{m.label}", m, d) for m, d in zip(modalities, dims)
        ),
        header_id="rt_H",
        n_classes=n_classes,
        header_inputs=sum(dims),
    )
    assert reassemble(split(model)) == model


def test_encoder_determinism(family):
    enc = family.get("M3").encoder_for(Modality.TEXT)
    a = eval_encoder(enc, "speech-0", 0)
    b = eval_encoder(enc, "speech-0", 0)
    assert a.values == b.values
    assert len(a.values) == 512
    assert all(-1.0 <= x <= 1.0 for x in a.values)


def test_encoder_distinguishes_payloads(family):
    enc = family.get("M2").encoder_for(Modality.VITALS)
    for i in range(1000):
        a = eval_encoder(enc, f"pair-a-{i}", 0)
        b = eval_encoder(enc, f"pair-b-{i}", 0)
        assert a.values != b.values


def test_encoder_distinguishes_versions(family):
    enc = family.get("M2").encoder_for(Modality.VITALS)
    assert eval_encoder(enc, "p", 0).values != eval_encoder(enc, "p", 1).values


def test_shared_encoder_semantics(family):
    # Sibling models' encoders of one modality agree on identical payloads.
    m2_t = family.get("M2").encoder_for(Modality.TEXT)
    m3_t = family.get("M3").encoder_for(Modality.TEXT)
    assert eval_encoder(m2_t, "speech-0", 0).values == eval_encoder(m3_t, "speech-0", 0).values


def test_encoder_rejects_empty_payload(family):
    with pytest.raises(ValueError):
        eval_encoder(family.get("M1").encoders[0], "", 0)


def _fresh_features(model, payloads):
    return {
        m: eval_encoder(model.encoder_for(m), *payloads[m]) for m in model.modalities
    }


def test_header_matches_monolithic(family):
    model = family.get("M3")
    payloads = {
        Modality.TEXT: ("speech-1", 0),
        Modality.VITALS: ("vitals-2", 0),
        Modality.IMAGE: ("image-3", 0),
    }
    via_header = eval_header(model, _fresh_features(model, payloads))
    via_monolithic = eval_monolithic(model, payloads)
    assert via_header.class_index == via_monolithic.class_index
    assert via_header.model_id == via_monolithic.model_id == "M3"


def test_header_determinism(family):
    model = family.get("M2")
    payloads = {Modality.TEXT: ("s", 0), Modality.VITALS: ("v", 0)}
    a = eval_header(model, _fresh_features(model, payloads))
    b = eval_header(model, _fresh_features(model, payloads))
    assert a == b


def test_header_missing_modality(family):
    model = family.get("M2")
    features = {Modality.TEXT: eval_encoder(model.encoder_for(Modality.TEXT), "s", 0)}
    with pytest.raises(MissingModality):
        eval_header(model, features)


def test_header_rejects_extra_modality(family):
    m1 = family.get("M1")
    features = {
        Modality.TEXT: eval_encoder(m1.encoder_for(Modality.TEXT), "s", 0),
        Modality.VITALS: FeatureVector(values=(0.0,) * 32, producer_module="x", payload_version=0),
    }
    with pytest.raises(MissingModality):
        eval_header(m1, features)


def test_header_dim_mismatch(family):
    model = family.get("M1")
    bad = FeatureVector(values=(0.5,) * 8, producer_module="M1_T", payload_version=0)
    with pytest.raises(DimMismatch):
        eval_header(model, {Modality.TEXT: bad})


def test_header_is_order_sensitive():
    # Same multiset of bytes, swapped across modalities: classes must differ
    # for at least some payload pairs, or the hash ignores layout.
    model = ModelSpec(
        model_id="ord",
        encoders=(
            EncoderSpec("ord_T", Modality.TEXT, 4),
            EncoderSpec("ord_V", Modality.VITALS, 4),
        ),
        header_id="ord_H",
        n_classes=46,
    )
    differing = 0
    for i in range(100):
        fa = eval_encoder(model.encoder_for(Modality.TEXT), f"a-{i}", 0)
        fb = eval_encoder(model.encoder_for(Modality.VITALS), f"b-{i}", 0)
        fwd = eval_header(model, {Modality.TEXT: fa, Modality.VITALS: fb})
        swapped = eval_header(
            model,
            {
                Modality.TEXT: FeatureVector(fb.values, "ord_T", 0),
                Modality.VITALS: FeatureVector(fa.values, "ord_V", 0),
            },
        )
        differing += fwd.class_index != swapped.class_index
    assert differing > 50


def test_classify_agrees_with_header_over_fresh_encoders(family):
    # The memoized classification path must equal the generic byte-hash path.
    for seed in range(300):
        model = family.models[seed % 3]
        payloads = {
            m: (f"payload-{seed}-{m.label}", seed % 3) for m in model.modalities
        }
        assert classify(model, payloads) == eval_header(model, _fresh_features(model, payloads)).class_index


def test_splitter_soundness(family):
    # Evaluating the split parts then the header equals the monolithic run,
    # bit for bit, for every family model.
    for model in family:
        parts = split(model).parts
        for trial in range(50):
            payloads = {m: (f"sound-{trial}-{m.label}", 0) for m in model.modalities}
            features = {m: eval_encoder(parts[m], *payloads[m]) for m in parts}
            assert eval_header(model, features).class_index == eval_monolithic(model, payloads).class_index


def test_monolithic_definitional_equality(family):
    m1 = family.get("M1")
    rec = eval_monolithic(m1, {Modality.TEXT: ("speech-0", 0)})
    features = {Modality.TEXT: eval_encoder(m1.encoder_for(Modality.TEXT), "speech-0", 0)}
    assert rec.class_index == eval_header(m1, features).class_index


def test_monolithic_repeatable(family):
    m3 = family.get("M3")
    payloads = {
        Modality.TEXT: ("s", 0),
        Modality.VITALS: ("v", 0),
        Modality.IMAGE: ("i", 0),
    }
    assert eval_monolithic(m3, payloads) == eval_monolithic(m3, payloads)
    with pytest.raises(MissingModality):
        eval_monolithic(m3, {Modality.TEXT: ("s", 0)})


def test_class_index_in_range(family):
    m3 = family.get("M3")
    for i in range(200):
        payloads = {m: (f"r-{i}-{m.label}", 0) for m in m3.modalities}
        assert 0 <= classify(m3, payloads) < m3.n_classes


def test_family_json_roundtrip(family):
    text = family_to_json(family)
    loaded = family_from_json(text)
    assert [m.model_id for m in loaded] == ["M1", "M2", "M3"]
    for original, restored in zip(family, loaded):
        assert restored.n_classes == original.n_classes
        assert [e.module_id for e in restored.encoders] == [e.module_id for e in original.encoders]
        assert [e.feature_dim for e in restored.encoders] == [e.feature_dim for e in original.encoders]


@settings(max_examples=50)
@given(st.text(min_size=1, max_size=12), st.integers(min_value=0, max_value=3))
def test_encoder_purity_under_shared_seed(payload, version):
    fam = default_family()
    vecs = {
        model.model_id: eval_encoder(model.encoder_for(Modality.TEXT), payload, version)
        for model in fam
    }
    assert vecs["M1"].values == vecs["M2"].values == vecs["M3"].values

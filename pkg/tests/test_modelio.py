import numpy as np
import pytest

from singqa import (
    BiasCorrector,
    FusionModel,
    HeadPredictor,
    ModelFormatError,
    file_digest,
    load_model,
    save_corrected_head,
    save_fusion,
    save_head,
    verify_members,
)

from conftest import fitted_plain_head


def fit_small_head(rng, variant="plain", **kwargs):
    if variant == "spectrum":
        d_emb, d_spec = 3, 6
        X = np.hstack([rng.normal(size=(40, d_emb)), rng.normal(size=(40, d_spec))])
        kwargs.setdefault("embedding_dim", d_emb)
        kwargs.setdefault("projection_dim", 2)
    elif variant == "pitch_histogram":
        X = rng.normal(size=(40, 124))
    elif variant == "compressed_pitch":
        X = rng.normal(size=(40, 6))
    else:
        X = rng.normal(size=(40, 5))
    y = np.clip(3.0 + X[:, 0], 1, 5)
    head = HeadPredictor(variant=variant, max_epochs=8, patience=8, seed=2, **kwargs)
    head.fit(X, y, X, y, [f"s{i % 4}" for i in range(40)])
    return head, X


@pytest.mark.parametrize("variant", ["plain", "compressed_pitch", "pitch_histogram", "spectrum"])
def test_head_round_trip_preserves_forward(tmp_path, rng, variant):
    head, X = fit_small_head(rng, variant)
    path = tmp_path / "head.model"
    save_head(head, path, histogram_norm="voiced")
    loaded, meta = load_model(path)
    assert meta == {"kind": "head", "histogram_norm": "voiced"}
    assert loaded.variant == variant
    assert np.array_equal(loaded.predict(X), head.predict(X))


def test_head_file_bytes_deterministic(tmp_path, rng):
    head, _ = fit_small_head(rng)
    save_head(head, tmp_path / "a.model")
    save_head(head, tmp_path / "b.model")
    assert (tmp_path / "a.model").read_bytes() == (tmp_path / "b.model").read_bytes()


def test_corrected_head_round_trip(tmp_path, rng):
    head = fitted_plain_head([1.0], -0.5)
    y = np.concatenate([rng.uniform(4.3, 5.0, 100), rng.uniform(2.6, 3.8, 100)])
    X = (y + rng.normal(0, 0.02, 200))[:, None]
    corr = BiasCorrector(head=head, learning_rate=1e-3, max_epochs=40, patience=40, seed=0)
    corr.fit(X, y, X, y, [f"s{i % 4}" for i in range(200)])
    path = tmp_path / "corrected.model"
    save_corrected_head(corr, path)
    loaded, meta = load_model(path)
    assert meta["kind"] == "corrected_head"
    assert isinstance(loaded, BiasCorrector)
    assert loaded.alpha == corr.alpha and loaded.beta == corr.beta
    assert np.array_equal(loaded.predict(X), corr.predict(X))
    # the frozen head inside survives byte-exactly
    assert np.array_equal(loaded.head.weights_, head.weights_)
    assert loaded.head.bias_ == head.bias_


def test_fusion_round_trip_and_digests(tmp_path, rng):
    head, _ = fit_small_head(rng)
    member_path = tmp_path / "member.model"
    save_head(head, member_path)
    digest = file_digest(member_path)
    model = FusionModel(
        member_ids=("member.model", "other.model"),
        weights=np.array([0.75, 0.25]),
        bias=0.05,
        member_digests=(digest, digest),
    )
    path = tmp_path / "fusion.model"
    save_fusion(model, path)
    loaded, meta = load_model(path)
    assert meta == {"kind": "fusion"}
    assert loaded.member_ids == model.member_ids
    assert loaded.member_digests == model.member_digests
    assert np.array_equal(loaded.weights, model.weights)
    assert loaded.bias == model.bias


def test_verify_members_detects_staleness(tmp_path, rng):
    head, _ = fit_small_head(rng)
    member_path = tmp_path / "member.model"
    save_head(head, member_path)
    model = FusionModel(
        member_ids=("member.model",),
        weights=np.array([1.0]),
        bias=0.0,
        member_digests=(file_digest(member_path),),
    )
    verify_members(model, [member_path])
    member_path.write_text(member_path.read_text() + "# tampered\n")
    with pytest.raises(ValueError, match="stale"):
        verify_members(model, [member_path])
    with pytest.raises(ValueError, match="1 members but 2"):
        verify_members(model, [member_path, member_path])


def test_fusion_requires_digests(tmp_path):
    model = FusionModel(member_ids=("a",), weights=np.ones(1), bias=0.0)
    with pytest.raises(ValueError, match="digest"):
        save_fusion(model, tmp_path / "f.model")


def test_rejects_foreign_files(tmp_path):
    path = tmp_path / "x.model"
    path.write_text("something else entirely\n")
    with pytest.raises(ModelFormatError, match="singqa-model"):
        load_model(path)


def test_rejects_missing_field(tmp_path, rng):
    head, _ = fit_small_head(rng)
    path = tmp_path / "head.model"
    save_head(head, path)
    text = "\n".join(ln for ln in path.read_text().splitlines() if not ln.startswith("weights:"))
    path.write_text(text + "\n")
    with pytest.raises(ModelFormatError, match="weights"):
        load_model(path)


def test_rejects_unknown_kind_and_section(tmp_path):
    path = tmp_path / "k.model"
    path.write_text("singqa-model 1\nkind: sandwich\n")
    with pytest.raises(ModelFormatError, match="kind"):
        load_model(path)
    path.write_text("singqa-model 1\nkind: head\nsection: mystery 9\n")
    with pytest.raises(ModelFormatError, match="section"):
        load_model(path)


def test_rejects_inconsistent_weight_length(tmp_path, rng):
    head, _ = fit_small_head(rng)
    path = tmp_path / "head.model"
    save_head(head, path)
    text = path.read_text().replace("embedding_dim: 5", "embedding_dim: 9")
    path.write_text(text)
    with pytest.raises(ModelFormatError, match="weight length"):
        load_model(path)

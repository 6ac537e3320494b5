import json

import numpy as np
import pytest

from toxscreen import bundle as bundle_mod
from toxscreen import featurize
from toxscreen.bundle import (load_bundle, predict_smiles,
                              reliability_threshold)


@pytest.fixture(scope="module")
def loaded(demo_bundle_dir):
    return load_bundle(demo_bundle_dir)


def test_manifest_contents(loaded):
    manifest = loaded.manifest
    assert manifest["version"] == 1
    assert manifest["config_checksum"] == "demo"
    assert [m["name"] for m in manifest["members"]] == [
        "gbm-pld", "gbm-fingerprint"]
    assert set(manifest["files"]) >= {
        "registry.txt", "fingerprint_spec.txt", "vocabulary.txt",
        "train_fingerprints.npy", "blend.txt"}
    assert len(loaded.checksum) == 64


def test_roundtrip_predictions_match_in_memory(loaded, trained_pipeline):
    table, split, features, members, blender = trained_pipeline
    from toxscreen import blend as blend_mod
    from toxscreen.dataset import TEST

    rows = split.indices(TEST)[:10]
    scores = np.stack([predict(rows) for _, _, predict in members], axis=-1)
    expected = blend_mod.predict_blend(blender, scores)
    results = predict_smiles(loaded, [table.smiles[i] for i in rows])
    for i, res in enumerate(results):
        assert "error" not in res
        for t, entry in enumerate(res["targets"]):
            assert entry["score"] == pytest.approx(expected[i, t], abs=5e-7)


def test_predict_contract(loaded):
    results = predict_smiles(loaded, ["CCO", "C1CC"])
    good, bad = results
    assert set(good) == {"smiles", "canonical_key", "distance", "reliable",
                        "targets"}
    assert len(good["targets"]) == len(loaded.targets)
    row = good["targets"][0]
    assert row["target"] == loaded.targets[0]
    assert 0.0 <= row["score"] <= 1.0
    assert row["auc"] == 0.91
    assert set(bad) == {"smiles", "error"}
    assert "ring closure" in bad["error"]


def test_reliable_flag_matches_threshold(loaded):
    results = predict_smiles(loaded, ["CCO", "c1ccccc1CCNC(=O)C"])
    for res in results:
        assert res["reliable"] == (
            res["distance"] <= loaded.reliability_threshold)


def test_tampered_file_rejected(demo_bundle_dir, tmp_path):
    import shutil

    copy = tmp_path / "tampered"
    shutil.copytree(demo_bundle_dir, copy)
    path = copy / "vocabulary.txt"
    path.write_text(path.read_text() + "tampered\n")
    with pytest.raises(ValueError, match="bundle checksum mismatch"):
        load_bundle(copy)


def test_unknown_member_kind_rejected(demo_bundle_dir, tmp_path):
    import hashlib
    import shutil

    copy = tmp_path / "badkind"
    shutil.copytree(demo_bundle_dir, copy)
    manifest = json.loads((copy / "manifest.json").read_text())
    manifest["members"][0]["model"] = "svm"
    (copy / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ValueError, match="unknown model kind"):
        load_bundle(copy)


def test_reliability_threshold_is_loo_quantile():
    rng = np.random.default_rng(0)
    fps = rng.random((40, 166)) < 0.2
    tau = reliability_threshold(fps, k=5, quantile=0.9)
    dists = []
    for i in range(len(fps)):
        rest = np.delete(fps, i, axis=0)
        dists.append(featurize.jaccard_knn_distance(fps[i], rest, k=5))
    assert tau == pytest.approx(np.quantile(dists, 0.9))
    assert 0.0 <= tau <= 1.0

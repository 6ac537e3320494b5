"""Blend bundle: one directory packaging the member manifest, frozen
featurization state, member models, the blender, per-target evaluation
AUCs, and the reliability threshold, with a manifest checksum.

The bundle is the unit of deployment: the CLI ``predict`` command and the
HTTP service consume it read-only.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blend as blend_mod
from . import chem, dataset, evaluate, featurize, gbm, gcn, mlp

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class Bundle:
    directory: Path
    manifest: dict
    registry: featurize.DescriptorRegistry
    fp_spec: featurize.FingerprintSpec
    vocab: featurize.NGramVocabulary
    members: list[tuple[dict, object]]  # (member manifest entry, model)
    blender: blend_mod.BlendModel
    train_fingerprints: np.ndarray
    checksum: str

    @property
    def targets(self) -> list[str]:
        return self.manifest["targets"]

    @property
    def families(self) -> list[str | None]:
        return self.manifest["families"]

    @property
    def target_aucs(self) -> dict[str, float | None]:
        return self.manifest["target_aucs"]

    @property
    def reliability_threshold(self) -> float:
        return self.manifest["reliability_threshold"]


def reliability_threshold(train_fps: np.ndarray, k: int = 5,
                          quantile: float = 0.9) -> float:
    """Quantile of leave-one-out kNN Jaccard distances over the training set."""
    n = len(train_fps)
    dists = []
    for i in range(n):
        rest = np.delete(train_fps, i, axis=0)
        dists.append(featurize.jaccard_knn_distance(
            train_fps[i], rest, k=min(k, n - 1)))
    return float(np.quantile(dists, quantile))


def save_bundle(
    directory: str | Path,
    members: list[tuple[evaluate.MemberRecipe, object]],
    blender: blend_mod.BlendModel,
    registry: featurize.DescriptorRegistry,
    fp_spec: featurize.FingerprintSpec,
    vocab: featurize.NGramVocabulary,
    train_fingerprints: np.ndarray,
    targets: list[str],
    families: list[str | None],
    target_aucs: dict[str, float | None],
    config_checksum: str = "",
    threshold: float | None = None,
    knn_k: int = 5,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "registry.txt").write_text(registry.serialize())
    (directory / "fingerprint_spec.txt").write_text(fp_spec.serialize())
    (directory / "vocabulary.txt").write_text(vocab.serialize())
    np.save(directory / "train_fingerprints.npy",
            train_fingerprints.astype(bool))
    member_entries = []
    for recipe, model in members:
        filename = f"member_{recipe.name}.txt"
        _save_model(recipe.model, model, directory / filename)
        member_entries.append({"name": recipe.name, "model": recipe.model,
                               "features": recipe.features, "file": filename})
    gbm.save_gbm(blender.booster, directory / "blend.txt")
    if threshold is None:
        threshold = reliability_threshold(train_fingerprints, k=knn_k)
    manifest = {
        "version": 1,
        "members": member_entries,
        "blend_file": "blend.txt",
        "targets": targets,
        "families": families,
        "target_aucs": target_aucs,
        "reliability_threshold": threshold,
        "knn_k": knn_k,
        "config_checksum": config_checksum,
        "files": {},
    }
    files = ["registry.txt", "fingerprint_spec.txt", "vocabulary.txt",
             "train_fingerprints.npy", "blend.txt"]
    files += [e["file"] for e in member_entries]
    manifest["files"] = {f: _sha256(directory / f) for f in sorted(files)}
    (directory / MANIFEST).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def _save_model(kind: str, model, path: Path) -> None:
    if kind == "gbm":
        gbm.save_gbm(model, path)
    elif kind == "mlp":
        mlp.save_params(model, path)
    elif kind == "gcn":
        gcn.save_gcn(model, path)
    else:
        raise ValueError(f"unknown model kind {kind!r}")


def _load_model(kind: str, path: Path):
    if kind == "gbm":
        return gbm.load_gbm(path)
    if kind == "mlp":
        return mlp.load_params(path)
    if kind == "gcn":
        return gcn.load_gcn(path)
    raise ValueError(f"unknown model kind {kind!r}")


def load_bundle(directory: str | Path) -> Bundle:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text())
    for name, digest in manifest["files"].items():
        actual = _sha256(directory / name)
        if actual != digest:
            raise ValueError(f"bundle checksum mismatch for {name}")
    registry = featurize.DescriptorRegistry.deserialize(
        (directory / "registry.txt").read_text())
    fp_spec = featurize.FingerprintSpec.deserialize(
        (directory / "fingerprint_spec.txt").read_text())
    vocab = featurize.NGramVocabulary.deserialize(
        (directory / "vocabulary.txt").read_text())
    members = [(entry, _load_model(entry["model"], directory / entry["file"]))
               for entry in manifest["members"]]
    blender = blend_mod.BlendModel(
        [e["name"] for e in manifest["members"]],
        gbm.load_gbm(directory / manifest["blend_file"]),
    )
    train_fps = np.load(directory / "train_fingerprints.npy")
    checksum = hashlib.sha256(
        (directory / MANIFEST).read_bytes()).hexdigest()
    return Bundle(directory, manifest, registry, fp_spec, vocab, members,
                  blender, train_fps, checksum)


def _member_scores(bundle: Bundle, graph: chem.MolecularGraph,
                   smiles: str) -> np.ndarray:
    """(n_targets, n_members) member score matrix for one molecule."""
    n_targets = len(bundle.targets)
    scores = np.empty((n_targets, len(bundle.members)))
    feature_cache: dict[str, np.ndarray] = {}

    def features_for(family: str) -> np.ndarray:
        if family not in feature_cache:
            if family == "pld":
                feature_cache[family] = featurize.compute_pld(
                    graph, bundle.registry)
            elif family == "fingerprint":
                feature_cache[family] = featurize.compute_fingerprint(
                    graph, bundle.fp_spec).astype(float)
            elif family == "ngram":
                feature_cache[family] = featurize.smiles_ngrams(
                    smiles, bundle.vocab)
            else:
                raise ValueError(f"unknown feature family {family!r}")
        return feature_cache[family]

    for m, (entry, model) in enumerate(bundle.members):
        if entry["model"] == "gbm":
            feats = features_for(entry["features"])
            X = np.column_stack([
                np.repeat(feats[None, :], n_targets, axis=0),
                np.arange(n_targets, dtype=float)[:, None],
            ])
            scores[:, m] = gbm.predict_gbm(model, X)
        elif entry["model"] == "mlp":
            feats = features_for(entry["features"])
            scores[:, m] = mlp.forward(model, feats[None, :])[0]
        elif entry["model"] == "gcn":
            scores[:, m] = gcn.gcn_forward(model, graph)
    return scores


def predict_smiles(bundle: Bundle, smiles_list: list[str]) -> list[dict]:
    """Score a batch of SMILES; parse failures are reported inline."""
    results = []
    for text in smiles_list:
        try:
            graph = chem.parse_smiles(text)
        except chem.ParseError as exc:
            results.append({"smiles": text, "error": str(exc)})
            continue
        member = _member_scores(bundle, graph, text)
        blended = blend_mod.predict_blend(
            bundle.blender, member[None, :, :])[0]
        fp = featurize.compute_fingerprint(graph, bundle.fp_spec)
        distance = featurize.jaccard_knn_distance(
            fp, bundle.train_fingerprints,
            k=min(bundle.manifest.get("knn_k", 5),
                  len(bundle.train_fingerprints)))
        reliable = distance <= bundle.reliability_threshold
        entry = {
            "smiles": text,
            "canonical_key": chem.canonical_key(graph),
            "distance": round(distance, 6),
            "reliable": bool(reliable),
            "targets": [
                {
                    "target": target,
                    "family": bundle.families[t],
                    "score": round(float(blended[t]), 6),
                    "auc": bundle.target_aucs.get(target),
                    "distance": round(distance, 6),
                    "reliable": bool(reliable),
                }
                for t, target in enumerate(bundle.targets)
            ],
        }
        results.append(entry)
    return results

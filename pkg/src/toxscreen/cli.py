"""Command-line pipeline orchestration.

All commands read a single YAML config file; scalar keys can be overridden
with ``--set section.key=value``.  The resolved config is hashed (sha256 of
its canonical JSON form) and that checksum is embedded in every artifact,
so downstream commands can refuse inputs produced under a different
configuration.

Seed scheme: the global ``seed`` key (overridable with ``--seed``) is the
base; run ``i`` of ``n_seeds`` uses ``seed + i``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal
error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import yaml

from . import blend as blend_mod
from . import bundle as bundle_mod
from . import chem, dataset, evaluate, featurize, gbm, gcn, mlp, report
from .dataset import TRAIN, VALID, TEST, FOLD_NAMES

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid run configuration; message lists every problem found."""


class DataError(ValueError):
    """Problem with input data rather than configuration."""


# ---------------------------------------------------------------------------
# configuration


DEFAULT_MEMBERS = [
    {"name": "gbm-pld", "model": "gbm", "features": "pld"},
    {"name": "gbm-fingerprint", "model": "gbm", "features": "fingerprint"},
    {"name": "gbm-ngram", "model": "gbm", "features": "ngram"},
    {"name": "mlp-fingerprint", "model": "mlp", "features": "fingerprint"},
]

_MODEL_KINDS = ("gbm", "mlp", "gcn")
_FEATURE_FAMILIES = ("pld", "fingerprint", "ngram", "graph")
_STRATEGIES = ("index", "random", "scaffold")


@dataclass
class RunConfig:
    dataset: str
    output: str
    smiles_column: str = "smiles"
    id_column: str | None = "mol_id"
    target_columns: list[str] | None = None  # None: every other column
    families: dict[str, str] = field(default_factory=dict)
    seed: int = 0
    n_seeds: int = 1
    strategy: str = "random"
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    members: list[dict] = field(default_factory=lambda: list(DEFAULT_MEMBERS))
    blend: bool = True
    ngram_max: int = 4
    ngram_min_count: int = 5
    knn_k: int = 5
    reliability_quantile: float = 0.9
    thresholds: list[float] = field(
        default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    host: str = "127.0.0.1"
    port: int = 8000
    max_batch: int = 1000

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(self.seed + i for i in range(self.n_seeds))

    def checksum(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()

    def recipes(self) -> list[evaluate.MemberRecipe]:
        out = []
        for entry in self.members:
            extra = {k: v for k, v in entry.items()
                     if k not in ("name", "model", "features")}
            kind = entry["model"]
            config = None
            if extra:
                cls = {"gbm": gbm.GbmConfig, "mlp": mlp.MlpConfig,
                       "gcn": gcn.GcnConfig}[kind]
                config = cls(**extra)
            out.append(evaluate.MemberRecipe(
                entry["name"], kind, entry["features"], config))
        return out


def _coerce(value: str):
    try:
        return yaml.safe_load(value)
    except yaml.YAMLError:
        return value


def load_config(path: str | Path, overrides: tuple[str, ...] = (),
                seed: int | None = None) -> RunConfig:
    """Parse + validate; raises ConfigError listing every problem found."""
    problems: list[str] = []
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a YAML mapping")
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            problems.append(f"override {item!r} is not of the form key=value")
            continue
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                problems.append(f"override {key!r} descends into a scalar")
                break
        else:
            node[parts[-1]] = _coerce(value)
    if seed is not None:
        raw["seed"] = seed

    split = raw.get("split", {}) or {}
    features = raw.get("features", {}) or {}
    reliability = raw.get("reliability", {}) or {}
    service = raw.get("service", {}) or {}
    columns = raw.get("columns", {}) or {}
    config = RunConfig(
        dataset=str(raw.get("dataset", "")),
        output=str(raw.get("output", "")),
        smiles_column=columns.get("smiles", "smiles"),
        id_column=columns.get("id", "mol_id"),
        target_columns=columns.get("targets"),
        families=raw.get("families", {}) or {},
        seed=raw.get("seed", 0),
        n_seeds=raw.get("seeds", 1),
        strategy=split.get("strategy", "random"),
        fractions=tuple(split.get("fractions", (0.8, 0.1, 0.1))),
        members=raw.get("members", list(DEFAULT_MEMBERS)),
        blend=raw.get("blend", True),
        ngram_max=features.get("ngram_max", 4),
        ngram_min_count=features.get("ngram_min_count", 5),
        knn_k=reliability.get("knn_k", 5),
        reliability_quantile=reliability.get("quantile", 0.9),
        thresholds=list(reliability.get(
            "thresholds", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])),
        host=service.get("host", "127.0.0.1"),
        port=service.get("port", 8000),
        max_batch=service.get("max_batch", 1000),
    )
    if not config.dataset:
        problems.append("dataset: required")
    elif not Path(config.dataset).exists():
        problems.append(f"dataset: file not found: {config.dataset}")
    if not config.output:
        problems.append("output: required")
    if not isinstance(config.seed, int):
        problems.append("seed: must be an integer")
    if not isinstance(config.n_seeds, int) or config.n_seeds < 1:
        problems.append("seeds: must be a positive integer")
    if config.strategy not in _STRATEGIES:
        problems.append(f"split.strategy: {config.strategy!r} not one of "
                        f"{_STRATEGIES}")
    if len(config.fractions) != 3 or abs(sum(config.fractions) - 1.0) > 1e-9:
        problems.append("split.fractions: need three values summing to 1")
    if not config.members:
        problems.append("members: at least one member is required")
    names = set()
    for i, entry in enumerate(config.members):
        if not isinstance(entry, dict):
            problems.append(f"members[{i}]: must be a mapping")
            continue
        name = entry.get("name", "")
        if not name:
            problems.append(f"members[{i}]: name is required")
        elif name in names:
            problems.append(f"members[{i}]: duplicate name {name!r}")
        names.add(name)
        if entry.get("model") not in _MODEL_KINDS:
            problems.append(f"members[{i}]: model must be one of {_MODEL_KINDS}")
        if entry.get("features") not in _FEATURE_FAMILIES:
            problems.append(
                f"members[{i}]: features must be one of {_FEATURE_FAMILIES}")
        elif entry.get("model") == "gcn" and entry.get("features") != "graph":
            problems.append(f"members[{i}]: gcn members use features: graph")
        elif entry.get("model") != "gcn" and entry.get("features") == "graph":
            problems.append(f"members[{i}]: only gcn members accept "
                            "features: graph")
    if not 0 < config.reliability_quantile <= 1:
        problems.append("reliability.quantile: must be in (0, 1]")
    if config.max_batch < 1:
        problems.append("service.max_batch: must be positive")
    if problems:
        raise ConfigError("invalid config:\n" + "\n".join(
            f"  - {p}" for p in problems))
    return config


# ---------------------------------------------------------------------------
# shared helpers


def _load_table(config: RunConfig) -> dataset.AssayTable:
    import csv

    path = Path(config.dataset)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), None)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    if header is None:
        raise DataError(f"{path}: empty file")
    targets = config.target_columns
    if targets is None:
        skip = {config.smiles_column, config.id_column}
        targets = [c for c in header if c not in skip]
    id_column = config.id_column if config.id_column in header else None
    try:
        return dataset.load_csv(
            path, config.smiles_column, targets,
            id_column=id_column, families=config.families or None)
    except dataset.LoadError as exc:
        raise DataError(str(exc))


def _write_lock(outdir: Path, config: RunConfig) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    lock = dict(config.__dict__, checksum=config.checksum())
    (outdir / "config.lock.json").write_text(
        json.dumps(lock, indent=2, sort_keys=True, default=list) + "\n")


def _artifact_checksums(outdir: Path) -> dict[str, str]:
    """Config checksums embedded in existing artifacts under ``outdir``."""
    found: dict[str, str] = {}
    for path in sorted(outdir.rglob("*")):
        if path.name == bundle_mod.MANIFEST:
            value = json.loads(path.read_text()).get("config_checksum", "")
            if value:
                found[str(path)] = value
        elif path.suffix in (".tsv", ".txt"):
            try:
                first = path.read_text().splitlines()[:1]
            except (UnicodeDecodeError, IndexError):
                continue
            if first and first[0].startswith("# config-checksum "):
                found[str(path)] = first[0].split()[-1]
    return found


def _refuse_mixed_checksums(outdir: Path, checksum: str) -> None:
    stale = {p: c for p, c in _artifact_checksums(outdir).items()
             if c != checksum}
    if stale:
        listing = "\n".join(f"  - {p} ({c[:12]}...)" for p, c in stale.items())
        raise ConfigError(
            "output directory holds artifacts from a different config:\n"
            + listing + "\nremove them or use a fresh output directory")


def _split_for_seed(config: RunConfig, table: dataset.AssayTable,
                    seed: int) -> dataset.SplitAssignment:
    splitter = evaluate._SPLITTERS[config.strategy]
    return splitter(table, config.fractions, seed)


# ---------------------------------------------------------------------------
# command implementations (callable directly from tests)


def cmd_featurize(config: RunConfig) -> list[Path]:
    table = _load_table(config)
    outdir = Path(config.output) / "features"
    _write_lock(outdir, config)
    split = _split_for_seed(config, table, config.seed)
    features = evaluate.build_features(
        table, split.indices(TRAIN),
        n_max=config.ngram_max, min_count=config.ngram_min_count)
    checksum = config.checksum()
    header = f"# config-checksum {checksum}\n"
    written = []
    for name, text in (("registry.txt", features.registry.serialize()),
                       ("fingerprint_spec.txt", features.fp_spec.serialize()),
                       ("vocabulary.txt", features.vocab.serialize())):
        path = outdir / name
        path.write_text(header + text)
        written.append(path)
    for name, matrix in (("pld.npy", features.pld),
                         ("fingerprint.npy", features.fingerprint),
                         ("ngram.npy", features.ngram)):
        path = outdir / name
        np.save(path, matrix)
        written.append(path)
    click.echo(f"featurized {table.n_molecules} molecules -> {outdir}")
    return written


def cmd_split(config: RunConfig) -> list[Path]:
    table = _load_table(config)
    outdir = Path(config.output) / "splits"
    _write_lock(outdir, config)
    checksum = config.checksum()
    written = []
    for seed in config.seeds:
        split = _split_for_seed(config, table, seed)
        lines = [f"# config-checksum {checksum}",
                 f"# strategy={config.strategy} seed={seed}",
                 "mol_id\tfold"]
        for i in range(table.n_molecules):
            lines.append(f"{table.ids[i]}\t{FOLD_NAMES[split.folds[i]]}")
        path = outdir / f"split_{config.strategy}_{seed}.tsv"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    click.echo(f"wrote {len(written)} split assignment(s) -> {outdir}")
    return written


def _train_members(config: RunConfig, table, split, seed):
    features = evaluate.build_features(
        table, split.indices(TRAIN),
        n_max=config.ngram_max, min_count=config.ngram_min_count)
    trained = []
    for recipe in config.recipes():
        predict, model = evaluate.train_member(
            recipe, table, features, split, seed)
        trained.append((recipe, model, predict))
    return features, trained


def cmd_train(config: RunConfig) -> list[Path]:
    table = _load_table(config)
    outdir = Path(config.output) / "models"
    _write_lock(outdir, config)
    split = _split_for_seed(config, table, config.seed)
    _, trained = _train_members(config, table, split, config.seed)
    written = []
    for recipe, model, _ in trained:
        path = outdir / f"member_{recipe.name}.txt"
        bundle_mod._save_model(recipe.model, model, path)
        written.append(path)
    click.echo(f"trained {len(written)} member(s) -> {outdir}")
    return written


def cmd_blend(config: RunConfig) -> Path:
    """Full pipeline for the base seed, packaged as a deployable bundle."""
    table = _load_table(config)
    seed = config.seed
    split = _split_for_seed(config, table, seed)
    features, trained = _train_members(config, table, split, seed)
    valid_rows = split.indices(VALID)
    test_rows = split.indices(TEST)
    member_names = [r.name for r, _, _ in trained]
    valid_scores = np.stack(
        [predict(valid_rows) for _, _, predict in trained], axis=2)
    test_scores = np.stack(
        [predict(test_rows) for _, _, predict in trained], axis=2)
    try:
        blender = blend_mod.train_blend(
            valid_scores, table.labels[valid_rows], member_names, seed=seed)
    except ValueError as exc:
        raise DataError(str(exc))
    blended = blend_mod.predict_blend(blender, test_scores)
    target_aucs = {
        target: evaluate.roc_auc_or_none(
            table.labels[test_rows, t], blended[:, t])
        for t, target in enumerate(table.targets)
    }
    outdir = Path(config.output) / "bundle"
    _write_lock(outdir.parent, config)
    train_fps = features.fingerprint[split.indices(TRAIN)].astype(bool)
    bundle_mod.save_bundle(
        outdir, [(r, m) for r, m, _ in trained], blender,
        features.registry, features.fp_spec, features.vocab, train_fps,
        list(table.targets), list(table.families), target_aucs,
        config_checksum=config.checksum(), knn_k=config.knn_k,
    )
    shown = {t: evaluate._fmt(a) for t, a in target_aucs.items()}
    click.echo(f"bundle -> {outdir} (test AUC per target: {shown})")
    return outdir


def cmd_evaluate(config: RunConfig) -> list[Path]:
    table = _load_table(config)
    outdir = Path(config.output) / "eval"
    checksum = config.checksum()
    if outdir.exists():
        _refuse_mixed_checksums(outdir, checksum)
    _write_lock(outdir, config)
    rep = evaluate.run_cv(
        table, config.recipes(), strategy=config.strategy,
        seeds=config.seeds, fractions=config.fractions,
        with_blend=config.blend)
    written = report.write_eval_report(outdir, rep, checksum=checksum)
    summary = rep.summary()
    for (model, strategy), (mean, _) in summary.items():
        click.echo(f"{model} [{strategy}]: {evaluate._fmt(mean)}")
    return written


def cmd_predict(bundle_dir: str | Path, smiles: list[str]) -> list[dict]:
    try:
        bundle = bundle_mod.load_bundle(Path(bundle_dir))
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load bundle {bundle_dir}: {exc}")
    return bundle_mod.predict_smiles(bundle, smiles)


def cmd_importance(config: RunConfig) -> list[Path]:
    """Gain importance of the first gbm member's features."""
    table = _load_table(config)
    gbm_recipes = [r for r in config.recipes() if r.model == "gbm"]
    if not gbm_recipes:
        raise ConfigError("importance requires at least one gbm member")
    recipe = gbm_recipes[0]
    split = _split_for_seed(config, table, config.seed)
    features = evaluate.build_features(
        table, split.indices(TRAIN),
        n_max=config.ngram_max, min_count=config.ngram_min_count)
    _, model = evaluate.train_member(
        recipe, table, features, split, config.seed)
    gains = gbm.gain_importance(model)
    names = _feature_names(recipe.features, features) + ["task_id"]
    outdir = Path(config.output) / "importance"
    _write_lock(outdir, config)
    written = report.write_importance(
        outdir, names, gains, checksum=config.checksum())
    click.echo(f"importance ({recipe.name}) -> {outdir}")
    return written


def _feature_names(family: str, features: evaluate.FeatureBundle) -> list[str]:
    if family == "pld":
        return list(features.registry.names)
    if family == "fingerprint":
        return [bit.label() for bit in features.fp_spec.bits]
    if family == "ngram":
        grams = sorted(features.vocab.index, key=features.vocab.index.get)
        return [f"ngram:{g}" for g in grams]
    raise ValueError(f"no feature names for family {family!r}")


def cmd_reliability(config: RunConfig) -> list[Path]:
    """Reliability and complexity curves for the blend on the test fold."""
    table = _load_table(config)
    seed = config.seed
    split = _split_for_seed(config, table, seed)
    features, trained = _train_members(config, table, split, seed)
    valid_rows = split.indices(VALID)
    test_rows = split.indices(TEST)
    valid_scores = np.stack(
        [predict(valid_rows) for _, _, predict in trained], axis=2)
    test_scores = np.stack(
        [predict(test_rows) for _, _, predict in trained], axis=2)
    try:
        blender = blend_mod.train_blend(
            valid_scores, table.labels[valid_rows],
            [r.name for r, _, _ in trained], seed=seed)
    except ValueError as exc:
        raise DataError(str(exc))
    scores = blend_mod.predict_blend(blender, test_scores)
    train_fps = features.fingerprint[split.indices(TRAIN)].astype(bool)
    test_fps = features.fingerprint[test_rows].astype(bool)
    k = min(config.knn_k, len(train_fps))
    distances = np.array([
        featurize.jaccard_knn_distance(fp, train_fps, k=k) for fp in test_fps])
    labels = table.labels[test_rows]
    rel_rows = evaluate.reliability_curve(
        labels, scores, distances, config.thresholds)
    cplx_rows = evaluate.complexity_curve(
        labels, scores, test_fps.sum(axis=1))
    outdir = Path(config.output) / "reliability"
    _write_lock(outdir, config)
    written = report.write_reliability(
        outdir, rel_rows, cplx_rows, checksum=config.checksum())
    click.echo(f"reliability curves -> {outdir}")
    return written


# ---------------------------------------------------------------------------
# click wiring


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def cli(verbose: bool) -> None:
    """Virtual-screening pipeline: featurize, split, train, blend,
    evaluate, predict, and serve."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


_config_arg = click.argument(
    "config_path", metavar="CONFIG", type=click.Path())
_set_opt = click.option(
    "--set", "overrides", multiple=True, metavar="KEY=VALUE",
    help="Override a config key (dotted path).")
_seed_opt = click.option("--seed", type=int, default=None,
                         help="Override the global seed.")


def _config_command(fn):
    @_config_arg
    @_set_opt
    @_seed_opt
    def wrapper(config_path, overrides, seed):
        config = load_config(config_path, overrides, seed)
        fn(config)
    wrapper.__name__ = fn.__name__.removeprefix("cmd_")
    wrapper.__doc__ = fn.__doc__
    return cli.command()(wrapper)


featurize_command = _config_command(cmd_featurize)
split_command = _config_command(cmd_split)
train_command = _config_command(cmd_train)
blend_command = _config_command(cmd_blend)
evaluate_command = _config_command(cmd_evaluate)
importance_command = _config_command(cmd_importance)
reliability_command = _config_command(cmd_reliability)


@cli.command("predict")
@click.argument("bundle_dir", metavar="BUNDLE", type=click.Path())
@click.argument("smiles", nargs=-1, required=True)
def predict_command(bundle_dir: str, smiles: tuple[str, ...]) -> None:
    """Score SMILES against a trained bundle; one row per target."""
    results = cmd_predict(bundle_dir, list(smiles))
    failed = False
    for entry in results:
        if "error" in entry:
            click.echo(f"{entry['smiles']}\tERROR\t{entry['error']}")
            failed = True
            continue
        for row in entry["targets"]:
            flag = "reliable" if row["reliable"] else "unreliable"
            click.echo(f"{entry['smiles']}\t{row['target']}\t"
                       f"{row['score']:.6f}\t{row['distance']:.6f}\t{flag}")
    if failed:
        raise DataError("some inputs failed to parse")


@cli.command("serve")
@click.argument("bundle_dir", metavar="BUNDLE", type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--max-batch", default=1000, show_default=True, type=int)
def serve_command(bundle_dir: str, host: str, port: int,
                  max_batch: int) -> None:
    """Run the HTTP prediction service over a trained bundle."""
    import uvicorn

    from .service import create_app
    app = create_app(bundle_dir, max_batch=max_batch)
    uvicorn.run(app, host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping exceptions to documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except (click.UsageError, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (DataError, dataset.LoadError, chem.ParseError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except click.Abort:
        return 1
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("internal error")
        click.echo(f"internal error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())

import numpy as np
import pytest

from toxscreen import blend, dataset, evaluate, gbm, synthetic
from toxscreen.dataset import TRAIN, VALID

FIXTURE_CSV = "tests/data/fixture_500.csv"


@pytest.fixture(scope="session")
def fixture_table():
    return dataset.load_csv(
        FIXTURE_CSV, "smiles", list(synthetic.TARGETS),
        id_column="mol_id", families=synthetic.FAMILIES)


@pytest.fixture(scope="session")
def small_table():
    return synthetic.make_table(300, seed=1)


FAST_GBM = gbm.GbmConfig(n_rounds=40, max_depth=3)


@pytest.fixture(scope="session")
def trained_pipeline(small_table):
    """Split, featurize, train two gbm members and a blend; shared by the
    bundle/cli/service tests to keep the suite fast."""
    table = small_table
    split = dataset.split_random(table, (0.8, 0.1, 0.1), 0)
    features = evaluate.build_features(table, split.indices(TRAIN))
    recipes = [
        evaluate.MemberRecipe("gbm-pld", "gbm", "pld", FAST_GBM),
        evaluate.MemberRecipe("gbm-fingerprint", "gbm", "fingerprint",
                              FAST_GBM),
    ]
    members = []
    valid_rows = split.indices(VALID)
    valid_scores = np.empty((len(valid_rows), table.n_targets, len(recipes)))
    for m, recipe in enumerate(recipes):
        predict, model = evaluate.train_member(
            recipe, table, features, split, 0)
        members.append((recipe, model, predict))
        valid_scores[:, :, m] = predict(valid_rows)
    blender = blend.train_blend(
        valid_scores, table.labels[valid_rows], [r.name for r in recipes],
        seed=0)
    return table, split, features, members, blender


@pytest.fixture(scope="session")
def demo_bundle_dir(tmp_path_factory, trained_pipeline):
    from toxscreen import bundle as bundle_mod

    table, split, features, members, blender = trained_pipeline
    outdir = tmp_path_factory.mktemp("bundle") / "demo"
    train_fps = features.fingerprint[split.indices(TRAIN)].astype(bool)
    bundle_mod.save_bundle(
        outdir, [(r, m) for r, m, _ in members], blender,
        features.registry, features.fp_spec, features.vocab, train_fps,
        list(table.targets), list(table.families),
        {t: 0.91 for t in table.targets}, config_checksum="demo")
    return outdir

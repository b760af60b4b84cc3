import json
import tempfile

import pytest

import oisub


def test_default_config_round_trips():
    cfg = json.loads(oisub.default_config())
    assert cfg["subspace"]["method"] == "pca"
    assert oisub.config_hash(oisub.default_config()) == oisub.config_hash(
        oisub.default_config()
    )


def test_config_errors_have_field_paths():
    cfg = json.loads(oisub.default_config())
    cfg["dataset"]["no_such_field"] = 1
    with pytest.raises(oisub.ConfigError, match="dataset.no_such_field"):
        oisub.config_hash(json.dumps(cfg))


def test_spearman_and_pca():
    assert oisub.spearman([1.0, 2.0, 3.0], [10.0, 20.0, 30.0]) == pytest.approx(1.0)
    assert oisub.spearman([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)
    rows = [[float(i), 2.0 * i + 0.001 * (i % 2)] for i in range(20)]
    comps, mean, ratio = oisub.pca(rows, 1)
    assert len(comps) == 1 and len(comps[0]) == 2
    assert ratio[0] > 0.999


def test_vocabulary_and_dataset():
    v = oisub.build_vocabulary(32, 32, 0)
    samples = oisub.gen_base(0, 3, 7, v, 42)
    assert len(samples) == 3
    text = samples[0]["text"]
    assert "contains the" in text
    assert v.detokenize(v.tokenize(text)) == text
    assert samples[0]["query_entity_oi"] in range(7)


def test_gen_stage_writes_artifacts():
    cfg = json.loads(oisub.default_config())
    with tempfile.TemporaryDirectory() as d:
        cfg.update(
            out_dir=d,
            seed=5,
            vocab={"objects": 32, "names": 32},
            dataset={"n": 20, "train_frac": 0.2, "dev_frac": 0.4,
                     "test_frac": 0.4, "sweep_dev_n": 4, "sweep_test_n": 4},
            corpus={"n_per_cell": 2, "k_min": 2, "k_max": 3},
        )
        oisub.cmd_gen(json.dumps(cfg))
        with pytest.raises(oisub.StageError, match="capture"):
            oisub.cmd_capture(json.dumps(cfg))

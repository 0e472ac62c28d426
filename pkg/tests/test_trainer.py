import json

import numpy as np
import pytest

from fbsed import trainer as trainer_mod
from fbsed.augment import AugmentConfig
from fbsed.data import load_manifest
from fbsed.toy import default_toy_spec, generate_toy_dataset
from fbsed.trainer import DivergenceError, TrainRun, stats_from_records, train


@pytest.fixture(scope="module")
def micro_corpus(tmp_path_factory):
    spec = default_toy_spec(seed=0)
    spec.counts = {"weak": 6, "synthetic": 3, "unlabeled": 2,
                   "validation": 3, "eval": 2}
    out = tmp_path_factory.mktemp("micro")
    manifests = generate_toy_dataset(spec, out)
    records = {}
    for subset in ("weak", "synthetic", "unlabeled", "validation", "eval"):
        records[subset], _ = load_manifest(manifests[subset])
    stats = stats_from_records(records["weak"] + records["synthetic"])
    return spec, records, stats


def micro_run(spec, seed=0, **overrides):
    defaults = dict(
        classes=spec.class_names, model_kind="fbcrnn", dims_preset="tiny",
        total_steps=20, checkpoint_every=10, batch_size=4,
        augment=AugmentConfig(p_mix=0.5, t_max_s=3.0), seed=seed)
    defaults.update(overrides)
    return TrainRun(**defaults)


class TestTrainRun:
    def test_checkpoint_must_divide_steps(self):
        with pytest.raises(ValueError):
            TrainRun(classes=("a",), total_steps=100, checkpoint_every=33)

    def test_unknown_kind_and_mode(self):
        with pytest.raises(ValueError):
            TrainRun(classes=("a",), model_kind="mlp")
        with pytest.raises(ValueError):
            TrainRun(classes=("a",), mode="sideways")

    def test_objective_defaults_per_kind(self):
        assert TrainRun(classes=("a",)).selection_objective == "tagging_f1"
        assert TrainRun(classes=("a",), model_kind="tagcnn").selection_objective == "frame_f1"

    def test_paper_scale_defaults(self):
        run = TrainRun(classes=("a",))
        assert run.total_steps == 40000
        assert run.checkpoint_every == 1000
        assert run.batch_size == 16
        assert run.p_mix == pytest.approx(2 / 3)
        assert run.augment.t_max_s == pytest.approx(15.0)


class TestTrainLoop:
    def test_fbcrnn_smoke(self, micro_corpus, tmp_path):
        spec, records, stats = micro_corpus
        run = micro_run(spec)
        result = train(run, records["weak"] + records["synthetic"],
                       records["validation"], stats, tmp_path / "run")
        # one step-0 row plus one row per checkpoint
        assert len(result.history) == 1 + run.total_steps // run.checkpoint_every
        assert result.history[-1]["step"] == run.total_steps
        assert result.best_path.exists() and result.last_path.exists()
        logged = [json.loads(line) for line in
                  result.log_path.read_text().splitlines()]
        assert logged == result.history
        # selection is the offline argmax over logged objectives
        checkpoint_rows = result.history[1:]
        best = max(range(len(checkpoint_rows)),
                   key=lambda i: checkpoint_rows[i]["objective"])
        assert result.best_step == checkpoint_rows[best]["step"]

    def test_checkpoint_metadata(self, micro_corpus, tmp_path):
        from fbsed.models import load_checkpoint

        spec, records, stats = micro_corpus
        run = micro_run(spec)
        result = train(run, records["weak"], records["validation"], stats,
                       tmp_path / "run")
        model, arrays, meta = load_checkpoint(result.best_path,
                                              expected_config_hash=run.config_hash())
        assert meta["model"]["classes"] == list(spec.class_names)
        assert meta["step"] == result.best_step
        assert meta["rng_state"]
        assert any(name.startswith("adam_m/") for name in arrays)

    def test_bit_reproducible_given_seed(self, micro_corpus, tmp_path):
        spec, records, stats = micro_corpus
        blobs = []
        for sub in ("a", "b"):
            run = micro_run(spec, seed=3)
            result = train(run, records["weak"] + records["synthetic"],
                           records["validation"], stats, tmp_path / sub)
            blobs.append((result.best_path.read_bytes(),
                          result.last_path.read_bytes(),
                          result.log_path.read_text()))
        assert blobs[0] == blobs[1]

    def test_different_seeds_differ(self, micro_corpus, tmp_path):
        spec, records, stats = micro_corpus
        outs = []
        for seed in (1, 2):
            run = micro_run(spec, seed=seed)
            result = train(run, records["weak"], records["validation"], stats,
                           tmp_path / f"s{seed}")
            outs.append(result.last_path.read_bytes())
        assert outs[0] != outs[1]

    def test_tagcnn_smoke_and_skip_warning(self, micro_corpus, tmp_path, caplog):
        import logging

        spec, records, stats = micro_corpus
        run = micro_run(spec, model_kind="tagcnn")
        # weak records carry no events and must be skipped with a warning
        with caplog.at_level(logging.WARNING, logger="fbsed.trainer"):
            result = train(run, records["weak"] + records["synthetic"],
                           records["validation"], stats, tmp_path / "cnn")
        assert any("without strong targets" in rec.message for rec in caplog.records)
        assert result.best_path.exists()

    def test_fwd_only_modes_run(self, micro_corpus, tmp_path):
        spec, records, stats = micro_corpus
        for mode in ("fwd_frame", "fwd_last"):
            run = micro_run(spec, mode=mode, total_steps=10, checkpoint_every=10)
            result = train(run, records["weak"], records["validation"], stats,
                           tmp_path / mode)
            assert result.history[-1]["step"] == 10

    def test_divergence_aborts_with_diagnostic(self, micro_corpus, tmp_path,
                                               monkeypatch):
        spec, records, stats = micro_corpus

        def nan_loss(y_fwd, y_bwd, z, mode):
            return float("nan"), np.zeros_like(y_fwd), None

        monkeypatch.setattr(trainer_mod, "fbcrnn_training_loss", nan_loss)
        run = micro_run(spec)
        with pytest.raises(DivergenceError, match="non-finite twice"):
            train(run, records["weak"], records["validation"], stats,
                  tmp_path / "diverge")

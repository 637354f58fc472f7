"""Flat key-value config: defaults, file parsing, overrides."""

import pytest

from forumcohort.config import DEFAULTS, parse_config_file, resolve_config
from forumcohort.errors import UsageError


class TestDefaults:
    def test_spec_named_defaults_present(self):
        cfg = resolve_config()
        assert cfg.get_str("anxiety_forum") == "anxiety"
        assert cfg.get_int("window_seconds") == 183 * 86400
        assert cfg.get_float("test_fraction") == 0.33
        assert cfg.get_str("split_unit") == "by_user"
        assert cfg.get_int("min_count") == 2
        assert cfg.get_int("max_vocab_size") == 20000
        assert cfg.get_int("max_len") == 128
        assert cfg.get_float("nb_alpha") == 1.0
        assert cfg.get_float("lr_lambda") == 1e-3
        assert cfg.get_float("lr_learning_rate") == 0.1
        assert cfg.get_int("lr_epochs") == 500
        assert cfg.get_int("d_model") == 64
        assert cfg.get_int("n_heads") == 4
        assert cfg.get_int("n_layers") == 2
        assert cfg.get_int("d_ff") == 256
        assert cfg.get_float("dropout_p") == 0.3
        assert cfg.get_float("learning_rate") == 1e-5
        assert cfg.get_float("adam_beta1") == 0.9
        assert cfg.get_float("adam_beta2") == 0.999
        assert cfg.get_float("adam_eps") == 1e-8
        assert cfg.get_int("max_phrase_len") == 3
        assert cfg.get_float("threshold") == 0.5
        assert cfg.get_float_list("lr_lambda_grid") == [1e-4, 1e-3, 1e-2, 1e-1, 1.0]

    def test_resolved_lines_sorted_and_complete(self):
        lines = resolve_config().resolved_lines()
        keys = [line.split(" = ")[0] for line in lines]
        assert keys == sorted(DEFAULTS)


class TestConfigFile:
    def test_file_values_override_defaults(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nseed = 9\nd_model = 32  # inline comment\n")
        cfg = resolve_config(config_file=path)
        assert cfg.get_int("seed") == 9
        assert cfg.get_int("d_model") == 32
        assert cfg.get_int("n_heads") == 4  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("mystery = 1\n")
        with pytest.raises(UsageError):
            parse_config_file(path)

    def test_bad_syntax_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("just words\n")
        with pytest.raises(UsageError):
            parse_config_file(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(UsageError):
            resolve_config(config_file=tmp_path / "absent.cfg")

    def test_enum_values_validated(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("split_unit = sideways\n")
        with pytest.raises(UsageError):
            parse_config_file(path)


class TestOverrides:
    def test_override_beats_file_and_seed_beats_all(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\nepochs = 5\n")
        cfg = resolve_config(config_file=path, overrides={"epochs": "7"}, seed=3)
        assert cfg.get_int("epochs") == 7
        assert cfg.get_int("seed") == 3

    def test_unknown_override_rejected(self):
        with pytest.raises(UsageError):
            resolve_config(overrides={"nope": "1"})

    def test_typed_accessor_errors(self):
        cfg = resolve_config(overrides={"epochs": "many"})
        with pytest.raises(UsageError):
            cfg.get_int("epochs")
        cfg = resolve_config(overrides={"synth_doc_len": "5"})
        with pytest.raises(UsageError):
            cfg.get_int_pair("synth_doc_len")

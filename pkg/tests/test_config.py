import pytest

from casegpt.config import load_config
from casegpt.errors import ConfigError, InvalidParams


class TestDefaults:
    def test_builtin_defaults(self):
        config = load_config(None, env={})
        assert config.store_path == ":memory:"
        assert config.kernels == "auto"
        assert config.encoder.backend == "hash"
        assert config.encoder.dim == 768
        assert config.hnsw.m == 16
        assert config.hnsw.ef_construction == 200
        assert config.hnsw.ef_search == 100
        assert config.retrieval.k == 100
        assert config.retrieval.n == 10
        assert config.retrieval.mmr_lambda == 0.7
        assert config.insight.threshold == 0.2
        assert config.insight.max_rounds == 2
        assert config.server.port == 8080

    def test_non_prefixed_env_ignored(self):
        config = load_config(None, env={"PATH": "/usr/bin", "HOME": "/root"})
        assert config.store_path == ":memory:"


class TestConfigFile:
    def write(self, tmp_path, text):
        path = tmp_path / "service.yaml"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_file_values_applied(self, tmp_path):
        path = self.write(
            tmp_path,
            """
store_path: /var/lib/cases.db
kernels: numpy
hnsw:
  m: 8
  ef_search: 64
retrieval:
  k: 50
  mmr_lambda: 0.4
server:
  port: "9000"
""",
        )
        config = load_config(path, env={})
        assert config.store_path == "/var/lib/cases.db"
        assert config.kernels == "numpy"
        assert config.hnsw.m == 8
        assert config.hnsw.ef_search == 64
        assert config.retrieval.k == 50
        assert config.retrieval.mmr_lambda == 0.4
        assert config.server.port == 9000  # coerced from string
        # untouched sections keep defaults
        assert config.retrieval.n == 10
        assert config.insight.token_budget == 2048

    def test_unknown_top_level_key(self, tmp_path):
        path = self.write(tmp_path, "retreival:\n  k: 5\n")
        with pytest.raises(ConfigError, match="retreival"):
            load_config(path, env={})

    def test_unknown_section_key(self, tmp_path):
        path = self.write(tmp_path, "hnsw:\n  ef_serach: 64\n")
        with pytest.raises(ConfigError, match="hnsw.ef_serach"):
            load_config(path, env={})

    def test_section_must_be_mapping(self, tmp_path):
        path = self.write(tmp_path, "hnsw: fast\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_file_must_be_mapping(self, tmp_path):
        path = self.write(tmp_path, "- a\n- b\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_invalid_yaml(self, tmp_path):
        path = self.write(tmp_path, "hnsw: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.yaml"), env={})

    def test_empty_file_keeps_defaults(self, tmp_path):
        path = self.write(tmp_path, "")
        config = load_config(path, env={})
        assert config.retrieval.k == 100

    def test_bad_numeric_value(self, tmp_path):
        path = self.write(tmp_path, "retrieval:\n  k: not-a-number\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})


class TestEnvOverrides:
    def test_env_beats_file(self, tmp_path):
        path = tmp_path / "service.yaml"
        path.write_text("retrieval:\n  k: 50\n", encoding="utf-8")
        config = load_config(str(path), env={"CASEGPT_RETRIEVAL_K": "25"})
        assert config.retrieval.k == 25

    def test_typed_parsing(self):
        config = load_config(
            None,
            env={
                "CASEGPT_HNSW_USE_HEURISTIC": "true",
                "CASEGPT_RETRIEVAL_MMR_LAMBDA": "0.4",
                "CASEGPT_HNSW_EF_SEARCH": "200",
                "CASEGPT_STORE_PATH": "/tmp/cases.db",
                "CASEGPT_KERNELS": "numpy",
            },
        )
        assert config.hnsw.use_heuristic is True
        assert config.retrieval.mmr_lambda == 0.4
        assert config.hnsw.ef_search == 200
        assert config.store_path == "/tmp/cases.db"
        assert config.kernels == "numpy"

    def test_multiword_key_within_section(self):
        config = load_config(None, env={"CASEGPT_ENCODER_BATCH_SIZE": "16"})
        assert config.encoder.batch_size == 16

    def test_unrecognized_env_rejected(self):
        with pytest.raises(ConfigError, match="CASEGPT_BOGUS"):
            load_config(None, env={"CASEGPT_BOGUS": "1"})
        with pytest.raises(ConfigError):
            load_config(None, env={"CASEGPT_HNSW_EF_SERACH": "64"})

    def test_boolean_requires_boolean(self):
        with pytest.raises(ConfigError):
            load_config(None, env={"CASEGPT_HNSW_USE_HEURISTIC": "7"})

    def test_bad_int_from_env(self):
        with pytest.raises(ConfigError):
            load_config(None, env={"CASEGPT_RETRIEVAL_K": "abc"})


class TestDerivedOptions:
    def test_hnsw_to_params(self):
        config = load_config(None, env={"CASEGPT_HNSW_M": "8"})
        params = config.hnsw.to_params()
        assert params.m == 8
        assert params.ef_construction == 200

    def test_hnsw_to_params_validates(self):
        config = load_config(None, env={"CASEGPT_HNSW_M": "1"})
        with pytest.raises(InvalidParams):
            config.hnsw.to_params()

    def test_retrieval_to_options_none_overrides_ignored(self):
        config = load_config(None, env={})
        options = config.retrieval.to_options(k=None, n=None, mmr_lambda=None)
        assert options.k == 100
        assert options.n == 10
        assert options.mmr_lambda == 0.7

    def test_retrieval_to_options_override_applied(self):
        config = load_config(None, env={})
        options = config.retrieval.to_options(n=3, mmr_lambda=0.2)
        assert options.n == 3
        assert options.mmr_lambda == 0.2
        assert options.weights.similarity == 0.7

    def test_retrieval_to_options_validates(self):
        config = load_config(None, env={})
        with pytest.raises(InvalidParams):
            config.retrieval.to_options(mmr_lambda=1.5)

    def test_insight_to_options(self):
        config = load_config(None, env={"CASEGPT_INSIGHT_MAX_ROUNDS": "5"})
        options = config.insight.to_options(threshold=None)
        assert options.max_rounds == 5
        assert options.threshold == 0.2
        with pytest.raises(InvalidParams):
            config.insight.to_options(threshold=0.0)

import pytest

from fundus_screen import kvconfig
from fundus_screen.augment import AugmentPolicy
from fundus_screen.config import SECTIONS, RunConfig, load_run_config
from fundus_screen.errors import ConfigError
from fundus_screen.imaging import PreprocessConfig
from fundus_screen.nnet import ArchDescriptor, TrainConfig


def test_section_keys_do_not_collide():
    keys = [k for cls in SECTIONS.values() for k in kvconfig.field_types(cls)]
    assert len(keys) == len(set(keys))
    assert "threshold" not in keys


def test_parse_pairs_errors():
    assert kvconfig.parse_pairs("# c\n\na = 1\nb=x=y\n") == {"a": "1", "b": "x=y"}
    with pytest.raises(ConfigError, match="duplicate"):
        kvconfig.parse_pairs("a=1\na=2\n")
    with pytest.raises(ConfigError):
        kvconfig.parse_pairs("just text\n")


@pytest.mark.parametrize("obj", [PreprocessConfig(sigma=2.5), AugmentPolicy(zoom=False),
                                 ArchDescriptor(variant="plain"), TrainConfig(lr0=3e-4)])
def test_component_roundtrip(obj):
    assert kvconfig.load(type(obj), kvconfig.dump(obj)) == obj


def test_bad_values():
    with pytest.raises(ConfigError, match="sigma"):
        RunConfig.from_pairs({"sigma": "wide"})
    with pytest.raises(ConfigError):
        RunConfig.from_pairs({"flip_h": "maybe"})


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("epochs=3\nepoch=4\n")
    with pytest.raises(ConfigError, match="epoch"):
        load_run_config(p)


def test_precedence_flags_over_file_over_defaults(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("epochs=7\nlr0=0.01\ncrop_size=500\n")
    rc = load_run_config(p, {"epochs": 3, "gamma": None})
    assert rc.train.epochs == 3
    assert rc.train.lr0 == 0.01
    assert rc.train.gamma == 0.95
    assert rc.preprocess == PreprocessConfig(crop_size=500)


def test_preprocess_absent_unless_named():
    assert load_run_config().preprocess is None
    assert load_run_config().threshold == 0.5


def test_run_config_text_roundtrip():
    rc = RunConfig(preprocess=PreprocessConfig(offset=100.0), threshold=0.3,
                   train=TrainConfig(seed=5))
    assert RunConfig.from_pairs(kvconfig.parse_pairs(rc.to_text())) == rc


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_run_config(tmp_path / "none.cfg")

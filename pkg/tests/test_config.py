import numpy as np
import pytest

from stereomcmc.config import PRESETS, ConfigError, load_config, parse_config, preset_config

BASE = """
[meta]
schema_version = 1
[target]
kind = gaussian
d = 3
[sampler]
kind = srw
[run]
length = 100
"""


def test_minimal_config_defaults():
    cfg = parse_config(BASE)
    assert cfg.d == 3 and cfg.sampler == "srw" and cfg.h is None
    assert np.array_equal(cfg.mean, np.zeros(3)) and np.array_equal(cfg.variance, np.ones(3))
    assert cfg.sigma0_scale == 3.0 and cfg.start == "equator" and cfg.seed == 0
    assert cfg.adapt is False and cfg.clip == 10.0


@pytest.mark.parametrize("text, field", [
    (BASE.replace("kind = gaussian\n", ""), "[target] kind"),
    (BASE.replace("d = 3\n", ""), "[target] d"),
    (BASE.replace("length = 100\n", ""), "[run] length"),
    (BASE.replace("schema_version = 1\n", ""), "schema_version"),
    (BASE.replace("kind = gaussian", "kind = student_t"), "[target] dof"),
])
def test_missing_fields_are_named(text, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        parse_config(text)


@pytest.mark.parametrize("bad", [
    BASE.replace("d = 3", "d = 0"),
    BASE.replace("d = 3", "d = three"),
    BASE.replace("kind = srw", "kind = mala"),
    BASE.replace("schema_version = 1", "schema_version = 2"),
    BASE + "[extra]\nx = 1\n",
    BASE.replace("length = 100", "length = 100\nlenght = 5"),
    BASE + "[sampler]\n",
    BASE.replace("kind = srw", "kind = srw\nh = -1"),
    BASE.replace("kind = srw", "kind = hmc") + "[adaptation]\nenabled = true\n",
    BASE + "[adaptation]\nr = 5\nR = 1\n",
    BASE + "[init]\nstart = 1, 2\n",
    BASE.replace("kind = gaussian", "kind = gaussian\nvariance = 1, -1, 1"),
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_vectors_and_start_point():
    cfg = parse_config(BASE + "[init]\nmu0 = 1, 2, 3\nstart = 0.5, 0.5, 0.5\n")
    assert np.array_equal(cfg.mu0, [1.0, 2.0, 3.0])
    assert np.array_equal(cfg.start, [0.5, 0.5, 0.5])
    cfg = parse_config(BASE + "[init]\nmu0 = 7\n")
    assert np.array_equal(cfg.mu0, [7.0, 7.0, 7.0])


def test_adaptive_config_needs_no_length():
    text = BASE.replace("length = 100\n", "") + "[adaptation]\nenabled = true\nbeta = 2\nrule = pow2\n"
    cfg = parse_config(text)
    assert cfg.adapt and cfg.beta == 2.0 and cfg.rule == "pow2" and cfg.length is None


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")
    path = tmp_path / "ok.ini"
    path.write_text(BASE)
    assert load_config(path).d == 3


def test_every_preset_parses():
    for name, (_, _, big) in PRESETS.items():
        cfg = preset_config(name)
        assert cfg.d >= 1
        if big is not None:
            assert preset_config(name, full=True).d >= cfg.d
        else:
            with pytest.raises(ConfigError):
                preset_config(name, full=True)
    with pytest.raises(ConfigError):
        preset_config("nope")


def test_scaled_presets_use_desk_scale():
    cfg = preset_config("paper-fig7-scaled")
    assert cfg.d == 50 and np.all(cfg.mu0 == 100.0) and cfg.dof == 2.0 and cfg.h is None
    full = preset_config("paper-fig7-scaled", full=True)
    assert full.d == 200 and np.all(full.mu0 == 1000.0)

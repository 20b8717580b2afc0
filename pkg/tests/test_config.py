import numpy as np
import pytest
from numpy.testing import assert_allclose

from qdiscern.config import bundled_config_path, load_config, loads_config
from qdiscern.errors import ConfigError

QUBIT = bundled_config_path().read_text()


def test_bundled_qubit():
    cfg = load_config(None)
    m = cfg.build_model()
    assert m.energy_variance == pytest.approx(1.0)
    assert_allclose(m.H0.matrix, np.diag([1, -1]))
    assert cfg.measurements == ["pi", "sld"]
    assert cfg.alpha == 0.05 and cfg.threshold == 0.1


def test_round_trip():
    for name in ("qubit.yaml", "two_segment.yaml"):
        cfg = load_config(bundled_config_path(name))
        again = loads_config(cfg.dump())
        assert again.to_dict() == cfg.to_dict()
        assert_allclose(again.build_model().psi0.amplitudes, cfg.build_model().psi0.amplitudes)


def test_dt_range():
    text = QUBIT.replace("dt: [0.0, 0.01, 0.02, 0.05, 0.1]", "dt: {start: 0.001, stop: 0.1, num: 3, log: true}")
    assert_allclose(loads_config(text).dt, [1e-3, 1e-2, 1e-1])


def test_syntax_error_has_position():
    with pytest.raises(ConfigError, match=r"<string>:\d+:\d+"):
        loads_config("model: [1, 2\nseed: 0\n")


@pytest.mark.parametrize("old,new,msg", [
    ("[[0.0, 0.0], [-1.0, 0.0]]", "[[5.0, 0.0], [-1.0, 0.0]]", "hamiltonian"),
    ("- [0.7071067811865476, 0.0]\n    - [0.7071067811865476, 0.0]", "- [1.0, 0.0]\n    - [1.0, 0.0]", "normalize-state"),
    ("alpha: 0.05", "alpha: 1.5", "alpha"),
    ("measurements: [pi, sld]", "measurements: [pi, bogus]", "bogus"),
    ("seed: 0", "seed: -3", "seed"),
    ("duration: 1.0", "duration: 0.0", "duration"),
])
def test_invalid_configs(old, new, msg):
    assert old in QUBIT
    with pytest.raises(ConfigError, match=msg):
        loads_config(QUBIT.replace(old, new))


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown"):
        loads_config(QUBIT + "bananas: 1\n")


def test_normalize_state():
    text = QUBIT.replace("0.7071067811865476", "2.0") + "normalize_state: true\n"
    cfg = loads_config(text)
    assert_allclose(cfg.build_model().psi0.amplitudes, [2**-0.5, 2**-0.5])


def test_explicit_povm():
    text = QUBIT.replace(
        "measurements: [pi, sld]",
        "measurements:\n  - label: z\n    povm:\n"
        "      - [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]\n"
        "      - [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]\n",
    )
    (label, povm), = loads_config(text).build_measurements()
    assert label == "z" and len(povm) == 2
    with pytest.raises(ConfigError, match="povm"):
        loads_config(text.replace("[[0, 0], [1, 0]]]\n", "[[0, 0], [0.5, 0]]]\n"))

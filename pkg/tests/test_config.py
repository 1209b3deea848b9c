import numpy as np
import pytest

from surveybench._validation import check_codes, check_fraction_grid, check_weights
from surveybench.config import digest, read_tree, write_tree
from surveybench.errors import ConfigError
from surveybench.raking import MarginTargets, RakeConfig, national_spec


def test_tree_round_trip(tmp_path):
    data = {"seed": 3, "sweep": {"increments": [0.0, 0.5]}}
    write_tree(data, tmp_path / "c.yaml")
    assert read_tree(tmp_path / "c.yaml") == data
    (tmp_path / "c.json").write_text('{"a": {"b": 1}}')
    assert read_tree(tmp_path / "c.json") == {"a": {"b": 1}}


def test_tree_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_tree(tmp_path / "missing.yaml")
    (tmp_path / "bad.yaml").write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        read_tree(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        read_tree(tmp_path / "list.yaml")
    (tmp_path / "empty.yaml").write_text("")
    assert read_tree(tmp_path / "empty.yaml") == {}


def test_digest_is_order_free():
    assert digest({"a": 1, "b": [1, 2]}) == digest({"b": [1, 2], "a": 1})
    assert digest({"a": 1}) != digest({"a": 2})
    assert len(digest({})) == 16


def test_targets_validation():
    spec = national_spec()
    good = {d.name: {c: 1 / len(d.categories) for c in d.categories} for d in spec.dimensions}
    MarginTargets.from_mapping(good).validate(spec)
    bad = {**good, "race_eth": {"white_nh": 0.5, "black_nh": 0.5, "hispanic": 0.1,
                                "other_nh": 0.0}}
    with pytest.raises(ConfigError):
        MarginTargets.from_mapping(bad).validate(spec)
    MarginTargets.from_mapping(bad, normalize=True).validate(spec)
    with pytest.raises(ConfigError):
        MarginTargets.from_mapping({k: v for k, v in good.items() if k != "region"}).validate(
            spec)
    with pytest.raises(ConfigError):
        RakeConfig.from_mapping({"tolerence": 1e-6})


def test_check_codes():
    assert check_codes([[0, 1], [1, 2]], [2, 3]).dtype == np.intp
    assert check_codes(np.array([[1.0]]), [2])[0, 0] == 1
    for bad in ([[0.5, 1]], [[0, 3]], [[-1, 0]], [[0]]):
        with pytest.raises(ValueError):
            check_codes(bad, [2, 3])


def test_check_weights_and_grid():
    with pytest.raises(ValueError):
        check_weights([1.0, -1.0], 2)
    with pytest.raises(ValueError):
        check_weights([1.0, np.nan], 2)
    with pytest.raises(ValueError):
        check_weights([1.0], 2)
    assert check_fraction_grid([0.0, 0.3, 1.0], 1000) == [0, 300, 1000]
    with pytest.raises(ValueError):
        check_fraction_grid([1.2], 10)
    with pytest.raises(ValueError):
        check_fraction_grid([0.15], 10)

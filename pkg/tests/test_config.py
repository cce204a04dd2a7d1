import pytest

from tflnbsa.config import OUTPUT_ENV, ConfigError, load_config, parse_override


def test_defaults(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    c = load_config()
    assert c.device.pair.gap_nm == 40.0
    assert c.device.coupling_length_um == 13.95
    assert c.device.pair.rib.width_nm == 475.0
    assert c.device.pair.rib.etch_depth_nm == 110.0
    assert c.device.stack.wavelength_um == pytest.approx(0.49355)
    assert c.grid.dx_nm == 10.0
    assert str(c.output_dir) == "tflnbsa-out"


def test_override_types():
    assert parse_override("a.b=3") == {"a": {"b": 3}}
    assert parse_override("x=[1, 2]") == {"x": [1, 2]}
    assert parse_override("s=null") == {"s": None}
    with pytest.raises(ConfigError):
        parse_override("novalue")
    with pytest.raises(ConfigError):
        parse_override("a..b=1")


def test_overrides_apply_and_gap_propagates_to_bend():
    c = load_config(overrides=["device.gap_nm=55", "grid.dx_nm=20"])
    assert c.device.pair.gap_nm == 55 and c.device.sbend.end_gap_nm == 55
    assert c.grid.dx_nm == 20


def test_file_layering(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("device:\n  coupling_length_um: 14.2\n")
    c = load_config(p, overrides=["device.coupling_length_um=13.0"])
    assert c.device.coupling_length_um == 13.0
    assert load_config(p).device.coupling_length_um == 14.2


def test_output_dir_from_env(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert load_config().output_dir == tmp_path


def test_unknown_field_named():
    with pytest.raises(ConfigError, match="device.rib.widht_nm"):
        load_config(overrides=["device.rib.widht_nm=400"])


def test_yaml_error_has_line_and_column(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("device:\n  gap_nm: 40\n bad: [\n")
    with pytest.raises(ConfigError, match=r"bad\.yaml:\d+:\d+"):
        load_config(p)


@pytest.mark.parametrize(
    "ov",
    ["device.gap_nm=abc", "device.gap_nm=true", "device.rib.width_nm=-5", "table.gaps_nm=[40]", "device=3"],
)
def test_bad_values(ov):
    with pytest.raises(ConfigError):
        load_config(overrides=[ov])


def test_missing_file_and_profile(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
    with pytest.raises(ConfigError):
        load_config(profile="nope")

import pytest

from selberg_lab import cache, forms


def test_roundtrip_and_verify(tmp_path):
    t = forms.delta_coefficients(1000)
    path = cache.write_table(cache.cache_path(tmp_path, "delta", 1000), t)
    back = cache.read_table(path)
    assert back.limit == 1000
    assert back.values.tobytes() == t.values.tobytes()
    assert cache.verify(path, t)


def test_corruption_detected(tmp_path):
    t = forms.delta_coefficients(100)
    path = cache.write_table(tmp_path / "d.coef", t)
    text = path.read_text()
    lines = text.splitlines()
    lines[-1] = lines[-1][:-1] + ("0" if lines[-1][-1] != "0" else "1")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(cache.CacheError):
        cache.read_table(path)


def test_version_mismatch_rejected(tmp_path):
    t = forms.delta_coefficients(20)
    path = cache.write_table(tmp_path / "d.coef", t)
    path.write_text(path.read_text().replace("version: 1", "version: 999", 1))
    with pytest.raises(cache.CacheError):
        cache.read_table(path)

import pytest

from singqa import ManifestError, UtteranceRecord, load_manifest, write_manifest

HEADER = "utt_id,system_id,wav_path,mos,emb_path,spec_path,pitch_path"


def write(tmp_path, rows, name="m.csv"):
    path = tmp_path / name
    path.write_text("\n".join([HEADER, *rows]) + "\n", encoding="utf-8")
    return path


def test_three_rows(tmp_path):
    path = write(tmp_path, [
        "u1,sysA,a.wav,3.5,,,",
        "u2,sysA,b.wav,4.0,e.sqaf,,",
        "u3,sysB,,2.0,emb.sqaf,spec.sqaf,p.sqaf",
    ])
    records = load_manifest(path)
    assert [r.utt_id for r in records] == ["u1", "u2", "u3"]
    assert records[0].wav_path == tmp_path / "a.wav"
    assert records[0].feature_paths == {}
    assert records[2].wav_path is None
    assert set(records[2].feature_paths) == {"embedding", "spectral", "pitch"}
    assert records[2].feature_paths["pitch"] == tmp_path / "p.sqaf"


def test_duplicate_id_names_the_id(tmp_path):
    path = write(tmp_path, ["dup,sysA,a.wav,3.0,,,", "dup,sysA,b.wav,3.0,,,"])
    with pytest.raises(ManifestError, match="'dup'"):
        load_manifest(path)


def test_mos_out_of_range(tmp_path):
    path = write(tmp_path, ["u1,sysA,a.wav,5.7,,,"])
    with pytest.raises(ManifestError, match=r"5\.7.*outside"):
        load_manifest(path)


def test_malformed_row_reports_row_number(tmp_path):
    path = write(tmp_path, ["u1,sysA,a.wav,3.0,,,", "u2,sysA,b.wav"])
    with pytest.raises(ManifestError, match="row 3"):
        load_manifest(path)


def test_non_numeric_mos(tmp_path):
    path = write(tmp_path, ["u1,sysA,a.wav,high,,,"])
    with pytest.raises(ManifestError, match="malformed mos"):
        load_manifest(path)


def test_missing_file():
    with pytest.raises(ManifestError, match="not found"):
        load_manifest("/nonexistent/manifest.csv")


def test_header_mismatch(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("id,system\nu1,s1\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="header"):
        load_manifest(path)


def test_requires_some_path(tmp_path):
    path = write(tmp_path, ["u1,sysA,,3.0,,,"])
    with pytest.raises(ManifestError, match="wav_path or at least one feature"):
        load_manifest(path)


def test_missing_label_is_none(tmp_path):
    path = write(tmp_path, ["u1,sysA,a.wav,,,,"])
    assert load_manifest(path)[0].mos_label is None


def test_absolute_paths_kept(tmp_path):
    path = write(tmp_path, [f"u1,sysA,/abs/a.wav,3.0,,,"])
    assert str(load_manifest(path)[0].wav_path) == "/abs/a.wav"


def test_write_then_load_round_trip(tmp_path):
    records = [
        UtteranceRecord("u1", "sysA", tmp_path / "a.wav", {"pitch": tmp_path / "p.sqaf"}, 3.25),
        UtteranceRecord("u2", "sysB", None, {"embedding": tmp_path / "e.sqaf"}, None),
    ]
    path = tmp_path / "out.csv"
    write_manifest(records, path)
    back = load_manifest(path)
    assert back[0].utt_id == "u1" and back[0].mos_label == 3.25
    assert back[0].wav_path == tmp_path / "a.wav"
    assert back[1].feature_paths["embedding"] == tmp_path / "e.sqaf"
    assert back[1].mos_label is None


def test_load_is_order_preserving_and_deterministic(tmp_path):
    rows = [f"u{i},sys{i % 3},w{i}.wav,{1 + (i % 9) * 0.5},,," for i in range(20)]
    path = write(tmp_path, rows)
    first = load_manifest(path)
    second = load_manifest(path)
    assert [r.utt_id for r in first] == [f"u{i}" for i in range(20)]
    assert first == second

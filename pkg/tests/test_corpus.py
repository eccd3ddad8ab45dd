import filecmp
import json

import numpy as np
import pytest

from depscale.corpus import (PHQ8_ITEMS, Phq8Labels, SessionManifest, Speaker, Split,
                             dump_manifest, generate_corpus, generate_synthetic_session,
                             load_manifest, parse_labels, parse_landmark_file, parse_lld_file,
                             parse_transcript)
from depscale.corpus.parsing import (COVAREP_CHANNELS, merge_channel_frames,
                                     parse_channel_file)
from depscale.corpus.resources import load_depression_lexicon, load_reference_face
from depscale.corpus.synth import derive_seed
from depscale.corpus.tables import NamedVector, read_feature_table, write_feature_table
from depscale.errors import MissingInputError, ParseError, ValidationError


def landmark_row(frame, t, success=1, offset=0.0):
    xs = [offset + i for i in range(68)]
    ys = [offset + 2 * i for i in range(68)]
    return ", ".join(str(v) for v in [frame, t, 0.9, success] + xs + ys)


# ---------------------------------------------------------------- landmarks

def test_landmarks_with_header(tmp_path):
    header = ", ".join(["frame", "timestamp", "confidence", "success"]
                       + [f"x{i}" for i in range(68)] + [f"y{i}" for i in range(68)])
    p = tmp_path / "lm.csv"
    p.write_text("\n".join([header, landmark_row(1, 0.0), landmark_row(2, 0.033, 0)]) + "\n")
    frames = parse_landmark_file(p)
    assert len(frames) == 2
    assert frames[0].valid and not frames[1].valid
    np.testing.assert_array_equal(frames[0].point(1), [0.0, 0.0])
    np.testing.assert_array_equal(frames[0].point(68), [67.0, 134.0])


def test_landmarks_headerless(tmp_path):
    p = tmp_path / "lm.csv"
    p.write_text(landmark_row(1, 0.0) + "\n" + landmark_row(2, 0.1) + "\n")
    assert [f.timestamp for f in parse_landmark_file(p)] == [0.0, 0.1]


def test_landmarks_nonmonotone_timestamp_names_row(tmp_path):
    p = tmp_path / "lm.csv"
    p.write_text("\n".join([landmark_row(1, 0.0), landmark_row(2, 0.1),
                            landmark_row(3, 0.1)]) + "\n")
    with pytest.raises(ParseError) as exc:
        parse_landmark_file(p)
    assert exc.value.row == 3


def test_landmarks_wrong_width(tmp_path):
    p = tmp_path / "lm.csv"
    p.write_text("1, 0.0, 0.9, 1, 3.0\n")
    with pytest.raises(ParseError):
        parse_landmark_file(p)


def test_landmarks_missing_file(tmp_path):
    with pytest.raises(MissingInputError):
        parse_landmark_file(tmp_path / "nope.csv")


# ---------------------------------------------------------------- transcript

def test_transcript_tab_with_header(tmp_path):
    p = tmp_path / "t.tsv"
    p.write_text("start_time\tstop_time\tspeaker\tvalue\n"
                 "3.0\t4.5\tParticipant\tyeah, <laughter> OK\n"
                 "1.0\t2.0\tEllie\thow are you\n")
    entries = parse_transcript(p)
    assert [e.start_time for e in entries] == [1.0, 3.0]
    assert entries[0].speaker is Speaker.INTERVIEWER
    assert entries[1].speaker is Speaker.PARTICIPANT
    assert entries[1].tokens == ("yeah,", "<laughter>", "OK")


def test_transcript_comma_keeps_commas_in_text(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0.5,1.5,participant,well, i guess\n")
    (e,) = parse_transcript(p)
    assert e.text == "well, i guess" and e.speaker is Speaker.PARTICIPANT


@pytest.mark.parametrize("row", ["2.0\t1.0\tParticipant\tx", "abc\t1.0\tParticipant\tx"])
def test_transcript_bad_times(tmp_path, row):
    p = tmp_path / "t.tsv"
    p.write_text("start\tstop\tspeaker\tvalue\n1.0\t2.0\tEllie\thi\n" + row + "\n")
    with pytest.raises(ParseError) as exc:
        parse_transcript(p)
    assert exc.value.row == 3


# ---------------------------------------------------------------- LLD

def test_lld_headerless_covarep_layout(tmp_path):
    data = np.arange(3 * 74, dtype=float).reshape(3, 74)
    data[:, 1] = [1, 0, 1]
    p = tmp_path / "c.csv"
    np.savetxt(p, data, delimiter=",")
    s = parse_lld_file(p)
    assert s.channels == list(COVAREP_CHANNELS) and len(COVAREP_CHANNELS) == 74
    assert s.frame_period == 0.010
    np.testing.assert_array_equal(s.voiced, [True, False, True])


def test_lld_time_column_sets_period(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("frameTime,F0,NAQ\n0.00,100,0.1\n0.02,110,0.2\n0.04,120,0.3\n")
    s = parse_lld_file(p)
    assert s.channels == ["F0", "NAQ"] and s.frame_period == pytest.approx(0.02)
    assert s.voiced.all()


def test_lld_generic_names_and_bad_token(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("1,2,3\n4,5,6\n")
    assert parse_lld_file(p).channels == ["ch0", "ch1", "ch2"]
    p.write_text("1,2,3\n4,x,6\n")
    with pytest.raises(ParseError) as exc:
        parse_lld_file(p)
    assert exc.value.row == 2


# ---------------------------------------------------------------- labels

def test_labels_header(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text(",".join(f"PHQ8_{n}" for n in PHQ8_ITEMS) + ",PHQ8_Score,PHQ8_Binary\n"
                 "1,2,0,3,1,0,2,1,10,1\n")
    lab = parse_labels(p)
    assert lab.items == (1, 2, 0, 3, 1, 0, 2, 1) and lab.total == 10 and lab.binary


def test_labels_headerless_and_mismatch(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("0,0,0,0,0,0,1,2\n")
    assert parse_labels(p).total == 3 and not parse_labels(p).binary
    p.write_text("0,0,0,0,0,0,1,2,4\n")
    with pytest.raises(ParseError):
        parse_labels(p)


def test_phq8_validation():
    with pytest.raises(ValidationError):
        Phq8Labels((0, 0, 0, 0, 0, 0, 0, 4))
    with pytest.raises(ValidationError):
        Phq8Labels((0,) * 7)
    assert Phq8Labels((2,) * 8).total == 16
    assert Phq8Labels((1, 1, 1, 1, 1, 1, 1, 3)).binary  # total 10 is the cut-off


def test_speaker_labels():
    assert Speaker.from_label(" PARTICIPANT ") is Speaker.PARTICIPANT
    assert Speaker.from_label("Ellie") is Speaker.INTERVIEWER


# ---------------------------------------------------------------- channels

def test_channel_merge(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("frame,timestamp,confidence,success,AU01\n1,0.0,0.9,1,0.5\n"
                 "2,0.1,0.9,0,0.6\n3,0.2,0.9,1,0.7\n")
    b.write_text("frame,timestamp,confidence,success,gx\n1,0.0,0.9,1,1.0\n"
                 "2,0.1,0.9,1,2.0\n3,0.2,0.9,1,3.0\n")
    m = merge_channel_frames([parse_channel_file(a), parse_channel_file(b)])
    assert m.names == ["AU01", "gx"]
    np.testing.assert_array_equal(m.values, [[0.5, 1.0], [0.7, 3.0]])


# ---------------------------------------------------------------- manifest

def test_manifest_round_trip(tmp_path, synthetic_session):
    path = tmp_path / "m.json"
    dump_manifest([synthetic_session], path)
    (s,) = load_manifest(path)
    assert s.session_id == synthetic_session.session_id
    assert s.landmarks.resolve() == synthetic_session.landmarks.resolve()
    assert s.split is Split.TRAIN and s.duration == 30.0


def test_manifest_errors(tmp_path, synthetic_session):
    path = tmp_path / "m.json"
    dump_manifest([synthetic_session], path)
    doc = json.loads(path.read_text())
    doc["sessions"].append(doc["sessions"][0])
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="duplicate"):
        load_manifest(path)
    doc["sessions"] = doc["sessions"][:1]
    doc["sessions"][0]["files"]["lld"] = str(tmp_path / "missing.csv")
    path.write_text(json.dumps(doc))
    with pytest.raises(MissingInputError, match="missing.csv"):
        load_manifest(path)
    assert load_manifest(path, check_files=False)
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        load_manifest(path)
    with pytest.raises(MissingInputError):
        load_manifest(tmp_path / "absent.json")


def test_session_manifest_channels_coerced(tmp_path):
    s = SessionManifest("x", 1.0, tmp_path / "a", tmp_path / "c", tmp_path / "l", tmp_path / "t")
    assert s.channels == (tmp_path / "c",)
    with pytest.raises(ValidationError):
        SessionManifest("x", 0.0, "a", "c", "l", "t")


# ---------------------------------------------------------------- synthetic data

def test_synthetic_session_parses(synthetic_session):
    frames = parse_landmark_file(synthetic_session.landmarks)
    assert len(frames) == 900
    assert 0 < sum(not f.valid for f in frames) < 40
    lld = parse_lld_file(synthetic_session.lld)
    assert lld.n_frames == 3000 and lld.channels == list(COVAREP_CHANNELS)
    assert lld.frame_period == pytest.approx(0.01)
    transcript = parse_transcript(synthetic_session.transcript)
    assert any(e.speaker is Speaker.PARTICIPANT for e in transcript)
    assert parse_labels(synthetic_session.labels).total == 12


def test_synthetic_session_deterministic(tmp_path):
    a = generate_synthetic_session(3, 5, tmp_path / "a", session_id="s", duration=10)
    b = generate_synthetic_session(3, 5, tmp_path / "b", session_id="s", duration=10)
    for pa, pb in zip(a.all_paths(), b.all_paths()):
        assert filecmp.cmp(pa, pb, shallow=False), pa.name
    c = generate_synthetic_session(4, 5, tmp_path / "c", session_id="s", duration=10)
    assert not filecmp.cmp(a.landmarks, c.landmarks, shallow=False)


def test_synthetic_rejects_bad_profile(tmp_path):
    with pytest.raises(ValidationError):
        generate_synthetic_session(0, 25, tmp_path)


def test_generate_corpus_splits(tmp_path):
    manifest = generate_corpus(tmp_path, n_sessions=10, seed=1, duration=5.0)
    sessions = load_manifest(manifest)
    assert [s.session_id for s in sessions] == [f"S{i:03d}" for i in range(10)]
    counts = {sp: sum(s.split is sp for s in sessions) for sp in Split}
    assert counts == {Split.TRAIN: 7, Split.DEV: 2, Split.TEST: 1}
    totals = sorted(parse_labels(s.labels).total for s in sessions)
    assert totals[0] == 0 and totals[-1] == 24


def test_derive_seed_stable():
    assert derive_seed(0, "gmm") == derive_seed(0, "gmm")
    assert derive_seed(0, "gmm") != derive_seed(0, "blink")
    assert derive_seed(1, "gmm") == (derive_seed(0, "gmm") + 1) % 2 ** 32


# ---------------------------------------------------------------- resources / tables

def test_shipped_resources():
    face = load_reference_face()
    assert face.shape == (68, 2) and np.all(np.isfinite(face))
    lex = load_depression_lexicon()
    assert len(lex) > 500 and "sad" in lex and all(w == w.lower() for w in lex)


def test_feature_table_round_trip(tmp_path):
    vecs = [NamedVector(["a", "b"], [0.1, 1 / 3]), NamedVector(["a", "b"], [-2.0, 1e-300])]
    p = tmp_path / "f.csv"
    write_feature_table(p, ["s1", "s2"], vecs, {"seed": 4})
    t = read_feature_table(p)
    assert t.session_ids == ["s1", "s2"] and t.names == ["a", "b"]
    np.testing.assert_array_equal(t.matrix, [[0.1, 1 / 3], [-2.0, 1e-300]])
    assert t.meta == {"format_version": "1", "seed": "4"}
    np.testing.assert_array_equal(t.subset(["s2"]).matrix, [[-2.0, 1e-300]])
    with pytest.raises(ValidationError):
        t.subset(["s3"])

"""Deterministic synthetic interview sessions.

Each session is a pure function of ``(seed, profile)`` where ``profile`` is the
PHQ-8 total to embed.  Severity leaks into the streams through a handful of
monotone effects so that classifiers have something to learn:

* blink rate rises and head motion shrinks with severity;
* smiling (AU12) falls, brow lowering (AU04) and head pitch rise;
* F0 variability and speaking rate fall, pauses grow;
* depression-lexicon words become more frequent, laughter rarer.

File layouts match the challenge files so that real data can be swapped in.
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from ..errors import ValidationError
from .manifest import dump_manifest
from .parsing import COVAREP_CHANNELS
from .resources import load_depression_lexicon, load_reference_face
from .types import PHQ8_ITEMS, N_LANDMARKS, SessionManifest, Split

FPS = 30.0
LLD_PERIOD = 0.010
DEFAULT_DURATION = 60.0

AU_CHANNELS = ["AU01_r", "AU04_r", "AU06_r", "AU12_r", "AU15_r", "AU17_r",
               "AU25_r", "AU26_r"]
GAZE_CHANNELS = ["gaze_0_x", "gaze_0_y", "gaze_0_z", "gaze_1_x", "gaze_1_y",
                 "gaze_1_z"]
POSE_CHANNELS = ["pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"]

NEUTRAL_WORDS = """i you we they it the a an and but so because that this there here
is was are were be been have has had do did go went get got make made know think
said say see look work job home house family friend friends school day days week
weekend morning night time year years people person mother father sister brother
kids city town car drive walk talk call read watch movie music food eat dinner
lunch breakfast place out about really just like kind of some lot lots pretty
maybe um uh yeah yes no well okay right thing things stuff usually sometimes
often always recently last next first then now still back around little bit""".split()

POSITIVE_WORDS = """good great happy fun enjoy enjoyed love loved nice glad excited proud
relaxed calm peaceful fine wonderful awesome amazing laugh laughing smile funny
cheerful hopeful grateful thankful confident energetic motivated interested
friendly helpful beautiful best better""".split()

QUESTIONS = [
    "how are you doing today",
    "where are you from originally",
    "what do you do to relax",
    "how easy is it for you to get a good night's sleep",
    "when was the last time you felt really happy",
    "how have you been feeling lately",
    "what are you most proud of in your life",
    "tell me about your relationship with your family",
    "what's one of your most memorable experiences",
    "is there anything you regret",
]

# Fixed table of per-channel severity effects on the LLD stream; shared by all
# sessions so the direction of each effect is corpus-wide.
_LLD_EFFECTS = np.random.default_rng(917).normal(0.0, 1.0, len(COVAREP_CHANNELS))
_LLD_BASE = np.random.default_rng(918).normal(0.0, 2.0, len(COVAREP_CHANNELS))


def _ar1(rng, n, phi, sigma, size=None):
    shape = (n,) if size is None else (n, size)
    noise = rng.normal(0.0, sigma, shape)
    return lfilter([1.0], [1.0, -phi], noise, axis=0)


def _allocate_items(total, rng):
    """Spread ``total`` over the 8 items as evenly as possible."""
    items = np.full(len(PHQ8_ITEMS), total // len(PHQ8_ITEMS))
    extra = rng.permutation(len(PHQ8_ITEMS))[: total % len(PHQ8_ITEMS)]
    items[extra] += 1
    return [int(v) for v in items]


def _transcript(rng, duration, severity):
    dep_words = load_depression_lexicon(sorted_list=True)
    rows = []
    t = float(rng.uniform(0.2, 0.8))
    speaking_rate = 2.6 * (1.0 - 0.45 * severity)
    p_dep = 0.02 + 0.16 * severity
    p_pos = 0.14 * (1.0 - severity)
    p_laugh = 0.4 * (1.0 - severity)
    while t < duration - 2.0:
        q = QUESTIONS[int(rng.integers(len(QUESTIONS)))]
        q_dur = float(rng.uniform(1.5, 3.0))
        rows.append((t, t + q_dur, "Ellie", q))
        t += q_dur + float(rng.uniform(0.3, 0.8)) + 1.2 * severity * float(rng.uniform(0.5, 1.0))
        a_dur = max(0.8, float(rng.normal(4.5 * (1.0 - 0.4 * severity), 1.0)))
        a_dur = min(a_dur, duration - t - 0.1)
        if a_dur <= 0.3:
            break
        n_words = max(1, int(round(a_dur * speaking_rate * float(rng.uniform(0.8, 1.2)))))
        words = []
        for _ in range(n_words):
            u = rng.random()
            if u < p_dep:
                words.append(dep_words[int(rng.integers(len(dep_words)))])
            elif u < p_dep + p_pos:
                words.append(POSITIVE_WORDS[int(rng.integers(len(POSITIVE_WORDS)))])
            else:
                words.append(NEUTRAL_WORDS[int(rng.integers(len(NEUTRAL_WORDS)))])
        if rng.random() < p_laugh:
            words.insert(int(rng.integers(len(words) + 1)), "<laughter>")
        rows.append((t, t + a_dur, "Participant", " ".join(words)))
        t += a_dur + float(rng.uniform(0.5, 1.5))
    return rows


def _participant_activity(rows, times):
    active = np.zeros(times.size, dtype=bool)
    for start, stop, speaker, _ in rows:
        if speaker == "Participant":
            active |= (times >= start) & (times < stop)
    return active


def _blink_closure(rng, n_frames, fps, severity):
    rate = 0.15 + 0.5 * severity  # blinks per second
    shape = np.array([0.4, 0.9, 1.0, 0.9, 0.4])
    closure = np.zeros(n_frames)
    f = int(rng.exponential(fps / rate))
    while f + shape.size < n_frames:
        closure[f:f + shape.size] = shape
        f += shape.size + 8 + int(rng.exponential(fps / rate))
    return closure


def _landmarks(rng, n_frames, fps, severity, speech):
    ref = load_reference_face()
    centre = ref.mean(axis=0)
    face = ref - centre + rng.normal(0.0, 0.8, ref.shape)

    closure = _blink_closure(rng, n_frames, fps, severity)
    mouth = np.where(speech, 0.5 + 0.5 * np.sin(2 * np.pi * 4.0 * np.arange(n_frames) / fps
                                                 + rng.uniform(0, 2 * np.pi)), 0.0)
    mouth = np.clip(mouth + rng.normal(0, 0.05, n_frames), 0, 1)
    brow = _ar1(rng, n_frames, 0.97, 0.08)

    pts = np.repeat(face[None], n_frames, axis=0)
    for eye in ((37, 40, (38, 39, 41, 42)), (43, 46, (44, 45, 47, 48))):
        corner_a, corner_b, lids = eye
        line = 0.5 * (pts[:, corner_a - 1, 1] + pts[:, corner_b - 1, 1])
        for p in lids:
            pts[:, p - 1, 1] = line + (pts[:, p - 1, 1] - line) * (1.0 - 0.85 * closure)
    for p in (56, 57, 58, 59, 60, 66, 67, 68):
        pts[:, p - 1, 1] += 6.0 * mouth
    for p in (50, 51, 52, 53, 54, 62, 63, 64):
        pts[:, p - 1, 1] -= 1.0 * mouth
    for p in range(18, 28):
        pts[:, p - 1, 1] -= 3.0 * brow

    motion = 1.0 - 0.7 * severity
    tx = _ar1(rng, n_frames, 0.95, 1.4 * motion)
    ty = _ar1(rng, n_frames, 0.95, 1.0 * motion)
    theta = _ar1(rng, n_frames, 0.97, 0.004 * motion)
    scale = 1.6 * (1.0 + _ar1(rng, n_frames, 0.98, 0.001))
    c, s = np.cos(theta), np.sin(theta)
    x = pts[..., 0]
    y = pts[..., 1]
    px = scale[:, None] * (c[:, None] * x - s[:, None] * y) + 320.0 + tx[:, None]
    py = scale[:, None] * (s[:, None] * x + c[:, None] * y) + 240.0 + ty[:, None]
    return np.round(px, 1), np.round(py, 1), (tx, ty, theta), mouth


def _write_rows(path, header, columns, fmts, sep=", "):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(sep.join(header) + "\n")
        for row in zip(*columns):
            fh.write(sep.join(f % v for f, v in zip(fmts, row)) + "\n")


def _write_matrix(path, header, matrix, fmt, sep=","):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(sep.join(header) + "\n")
        np.savetxt(fh, matrix, fmt=fmt, delimiter=sep)


def session_rng(seed, profile):
    return np.random.default_rng([int(seed), int(profile), 0x5E55])


def generate_synthetic_session(seed, profile, out_dir, session_id=None,
                               duration=DEFAULT_DURATION, split=Split.TRAIN):
    """Write one synthetic session under ``out_dir/<session_id>/``.

    Returns the :class:`SessionManifest` describing the written files.
    """
    if seed < 0:
        raise ValidationError("seed must be non-negative")
    if not 0 <= profile <= 24 or int(profile) != profile:
        raise ValidationError("profile must be an integer PHQ-8 total in [0, 24]")
    if not duration > 2.0:
        raise ValidationError("duration must exceed 2 seconds")
    profile = int(profile)
    session_id = session_id or f"syn{seed:05d}_{profile:02d}"
    sdir = Path(out_dir) / session_id
    sdir.mkdir(parents=True, exist_ok=True)

    rng = session_rng(seed, profile)
    severity = profile / 24.0

    rows = _transcript(rng, duration, severity)
    n_frames = int(round(duration * FPS))
    times = np.round(np.arange(n_frames) / FPS, 3)
    speech_video = _participant_activity(rows, times)
    px, py, (tx, ty, theta), mouth = _landmarks(rng, n_frames, FPS, severity, speech_video)

    success = (rng.random(n_frames) >= 0.01).astype(int)
    success[:2] = 1
    confidence = np.where(success == 1, rng.uniform(0.88, 0.98, n_frames), 0.0)
    px[success == 0] = 0.0
    py[success == 0] = 0.0
    frame_no = np.arange(1, n_frames + 1)

    lm_header = (["frame", "timestamp", "confidence", "success"]
                 + [f"x{i}" for i in range(N_LANDMARKS)]
                 + [f"y{i}" for i in range(N_LANDMARKS)])
    lm = np.column_stack([frame_no, times, confidence, success, px, py])
    _write_matrix(sdir / "landmarks.csv", lm_header, lm,
                  ["%d", "%.3f", "%.3f", "%d"] + ["%.1f"] * (2 * N_LANDMARKS), sep=", ")

    au = np.empty((n_frames, len(AU_CHANNELS)))
    au_means = [0.4, 0.3 + 1.4 * severity, 0.8 * (1 - severity) + 0.1,
                1.6 * (1 - severity) + 0.2, 0.2 + 0.9 * severity, 0.5, 0.0, 0.0]
    for j, m in enumerate(au_means):
        au[:, j] = m + _ar1(rng, n_frames, 0.9, 0.12)
    au[:, 6] += 1.5 * mouth
    au[:, 7] += 1.0 * mouth
    au = np.clip(au, 0.0, 5.0)
    gaze = np.empty((n_frames, 6))
    for eye in range(2):
        gaze[:, 3 * eye] = 0.05 * (-1) ** eye + _ar1(rng, n_frames, 0.9, 0.02)
        gaze[:, 3 * eye + 1] = 0.1 + 0.2 * severity + _ar1(rng, n_frames, 0.9, 0.02)
        gaze[:, 3 * eye + 2] = -0.98 + _ar1(rng, n_frames, 0.9, 0.005)
    pose = np.column_stack([
        tx * 0.6, ty * 0.6, 550.0 + _ar1(rng, n_frames, 0.98, 1.0),
        0.05 + 0.25 * severity + _ar1(rng, n_frames, 0.95, 0.01),
        _ar1(rng, n_frames, 0.95, 0.01), theta,
    ])
    ch = np.column_stack([frame_no, times, confidence, success, au, gaze, pose])
    _write_matrix(sdir / "channels.csv",
                  ["frame", "timestamp", "confidence", "success"]
                  + AU_CHANNELS + GAZE_CHANNELS + POSE_CHANNELS,
                  ch, ["%d", "%.3f", "%.3f", "%d"] + ["%.4f"] * 20, sep=", ")

    n_lld = int(round(duration / LLD_PERIOD))
    lld_times = (np.arange(n_lld) + 0.5) * LLD_PERIOD
    speech = _participant_activity(rows, lld_times)
    interviewer = np.zeros(n_lld, dtype=bool)
    for start, stop, speaker, _ in rows:
        if speaker != "Participant":
            interviewer |= (lld_times >= start) & (lld_times < stop)
    n_ch = len(COVAREP_CHANNELS)
    lld = _LLD_BASE[None, :] + _ar1(rng, n_lld, 0.8, 0.6, n_ch)
    lld[speech] += 1.2 * severity * _LLD_EFFECTS[None, :]
    lld[interviewer] += 0.8
    voiced = (speech | interviewer) & (rng.random(n_lld) < 0.8)
    f0_var = 22.0 * (1.0 - 0.7 * severity)
    f0 = np.where(speech, 115.0 + f0_var * _ar1(rng, n_lld, 0.99, 0.14), 0.0)
    f0 = np.where(interviewer, 210.0 + 30.0 * _ar1(rng, n_lld, 0.99, 0.14), f0)
    lld[:, 0] = np.where(voiced, f0, 0.0)
    lld[:, 1] = voiced.astype(float)
    _write_matrix(sdir / "covarep.csv", ["frameTime"] + list(COVAREP_CHANNELS),
                  np.column_stack([np.arange(n_lld) * LLD_PERIOD, lld]),
                  ["%.2f"] + ["%.6g"] * n_ch)

    _write_rows(sdir / "transcript.tsv", ["start_time", "stop_time", "speaker", "value"],
                list(zip(*rows)), ["%.3f", "%.3f", "%s", "%s"], sep="\t")

    items = _allocate_items(profile, rng)
    _write_rows(sdir / "labels.csv",
                [f"PHQ8_{name}" for name in PHQ8_ITEMS] + ["PHQ8_Score", "PHQ8_Binary"],
                [[v] for v in items + [profile, int(profile >= 10)]],
                ["%d"] * 10, sep=",")

    return SessionManifest(
        session_id=session_id,
        duration=float(duration),
        landmarks=sdir / "landmarks.csv",
        channels=(sdir / "channels.csv",),
        lld=sdir / "covarep.csv",
        transcript=sdir / "transcript.tsv",
        labels=sdir / "labels.csv",
        split=split,
    )


def derive_seed(seed, tag):
    """Stable per-purpose seed: ``seed`` offset by the CRC32 of ``tag``."""
    return (int(seed) + zlib.crc32(str(tag).encode("utf-8"))) % (2 ** 32)


def generate_corpus(out_dir, n_sessions=40, seed=0, duration=DEFAULT_DURATION,
                    split_fractions=(0.7, 0.2, 0.1)):
    """Write ``n_sessions`` sessions plus ``manifest.json`` under ``out_dir``.

    Profiles are spread evenly over 0..24 and assigned to splits by a seeded
    permutation.  Returns the manifest path.
    """
    if n_sessions < 2:
        raise ValidationError("a corpus needs at least 2 sessions")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(derive_seed(seed, "corpus"))
    profiles = np.round(np.linspace(0, 24, n_sessions)).astype(int)
    order = rng.permutation(n_sessions)
    n_train = max(1, int(round(split_fractions[0] * n_sessions)))
    n_dev = int(round(split_fractions[1] * n_sessions))
    splits = ([Split.TRAIN] * n_train + [Split.DEV] * n_dev
              + [Split.TEST] * (n_sessions - n_train - n_dev))
    sessions = []
    for rank, i in enumerate(order):
        session_seed = derive_seed(seed, f"session{i}")
        sessions.append(generate_synthetic_session(
            session_seed, int(profiles[i]), out_dir / "sessions",
            session_id=f"S{i:03d}", duration=duration, split=splits[rank],
        ))
    sessions.sort(key=lambda s: s.session_id)
    manifest = out_dir / "manifest.json"
    dump_manifest(sessions, manifest)
    return manifest

"""Dataset ingestion, dictionary / test-unit construction, synthetic data, persistence.

On-disk dataset layout::

    <root>/<class_name>/<sequence_id>/<frame_0001>.pgm

Frames are 8-bit grayscale binary PGM (P5) or PNG, flattened row-major and
divided by their maxval.  The first frame of each sequence is the neutral
face by convention.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dictionary import GroupedDictionary
from .errors import (BadImageFormat, InconsistentDimensions, InsufficientData, InvalidConfig,
                     MissingFrames, TooFewFrames)
from .linalg import read_csv, write_csv
from .prox import GroupPartition

CK_LABELS = ("angry", "contempt", "disgust", "fear", "happiness", "sadness", "surprise")
FRAME_SUFFIXES = (".pgm", ".png")


@dataclass(frozen=True)
class EmotionSequence:
    """Ordered frames of one sequence as a ``(T, d)`` array (row ``t`` = frame ``t``)."""

    label: str
    frames: np.ndarray
    seq_id: str = ""
    shape: tuple = ()

    def __post_init__(self):
        f = np.ascontiguousarray(self.frames, dtype=np.float64)
        if f.ndim != 2:
            raise InconsistentDimensions(f"frames must be a (T, d) array, got ndim={f.ndim}")
        if f.shape[0] < 2:
            raise MissingFrames(f"sequence {self.seq_id or self.label!r} has {f.shape[0]} frame(s); need >= 2")
        f.setflags(write=False)
        object.__setattr__(self, "frames", f)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def d(self) -> int:
        return self.frames.shape[1]


# ---------------------------------------------------------------- images

def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise BadImageFormat("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1  # exactly one whitespace byte ends the header


def decode_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Decode a binary P5 PGM; returns ``(pixels (h, w) uint8, maxval)``."""
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise BadImageFormat(f"expected P5 magic, got {tokens[0][:8]!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise BadImageFormat("non-integer PGM header field") from None
    if w < 1 or h < 1 or not 1 <= maxval <= 255:
        raise BadImageFormat(f"unsupported PGM geometry/maxval: {w}x{h}, maxval {maxval}")
    body = data[offset:offset + w * h]
    if len(body) != w * h:
        raise BadImageFormat(f"PGM body has {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w), maxval


def encode_pgm(pixels: np.ndarray, maxval: int = 255) -> bytes:
    px = np.asarray(pixels)
    if px.ndim != 2 or not 1 <= maxval <= 255:
        raise BadImageFormat("PGM encoding needs a 2-D image and maxval in 1..255")
    if px.min() < 0 or px.max() > maxval:
        raise BadImageFormat("pixel values outside 0..maxval")
    h, w = px.shape
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + px.astype(np.uint8).tobytes()


def read_frame(path) -> tuple[np.ndarray, tuple]:
    """Return ``(flattened intensities in [0, 1], (h, w))`` for a PGM or PNG file."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        try:
            from PIL import Image
        except ImportError:  # pragma: no cover - optional dependency
            raise BadImageFormat("PNG input needs Pillow (pip install chislr[png])") from None
        with Image.open(path) as im:
            px = np.asarray(im.convert("L"), dtype=np.float64)
        return (px / 255.0).ravel(), px.shape
    px, maxval = decode_pgm(path.read_bytes())
    return (px.astype(np.float64) / maxval).ravel(), px.shape


def _frame_files(seq_dir: Path):
    return sorted(p for p in seq_dir.iterdir()
                  if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES)


def load_sequence_dir(root, expected_shape: tuple | None = None) -> list[EmotionSequence]:
    """Load every ``<root>/<class>/<sequence>/`` directory as an :class:`EmotionSequence`.

    Sequences come back sorted by (class name, sequence id); frames are
    ordered by filename.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingFrames(f"dataset root {root} is not a directory")
    out, shape = [], expected_shape
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for seq_dir in sorted(p for p in class_dir.iterdir() if p.is_dir()):
            files = _frame_files(seq_dir)
            if len(files) < 2:
                raise MissingFrames(f"{seq_dir}: {len(files)} frame(s), need at least 2")
            frames = []
            for f in files:
                vec, hw = read_frame(f)
                if shape is None:
                    shape = tuple(hw)
                elif tuple(hw) != tuple(shape):
                    raise InconsistentDimensions(f"{f}: image is {hw}, expected {tuple(shape)}")
                frames.append(vec)
            out.append(EmotionSequence(class_dir.name, np.stack(frames), seq_dir.name, tuple(shape)))
    if not out:
        raise MissingFrames(f"no sequences found under {root}")
    return out


def write_sequence_dir(root, sequences: Sequence[EmotionSequence], shape: tuple) -> None:
    """Write sequences as 8-bit PGM frames (values clipped to [0, 1], scaled by 255)."""
    root = Path(root)
    for i, seq in enumerate(sequences):
        seq_dir = root / seq.label / (seq.seq_id or f"seq_{i:04d}")
        seq_dir.mkdir(parents=True, exist_ok=True)
        for t, frame in enumerate(seq.frames, start=1):
            px = np.rint(np.clip(frame, 0.0, 1.0) * 255).astype(np.uint8).reshape(shape)
            (seq_dir / f"frame_{t:04d}.pgm").write_bytes(encode_pgm(px))


# ---------------------------------------------------------------- construction

def class_order(sequences: Sequence[EmotionSequence], labels: Sequence[str] | None = None):
    """Class names in dictionary order: ``labels`` if given, else sorted unique labels."""
    present = sorted({s.label for s in sequences})
    if labels is None:
        return tuple(present)
    missing = set(present) - set(labels)
    if missing:
        raise InvalidConfig(f"sequences carry labels not in the class list: {sorted(missing)}")
    return tuple(labels)


def build_dictionary(sequences: Sequence[EmotionSequence], tau_trn: int,
                     labels: Sequence[str] | None = None) -> GroupedDictionary:
    """Atoms ``f_t - f_1`` for the last ``tau_trn`` frames of every training sequence.

    Columns are grouped by class (in ``labels`` order) and unit-normalised.
    """
    tau_trn = int(tau_trn)
    if tau_trn < 1:
        raise InvalidConfig(f"tau_trn must be positive, got {tau_trn}")
    labels = class_order(sequences, labels)
    by_class = defaultdict(list)
    for s in sequences:
        if s.n_frames < tau_trn + 1:
            raise TooFewFrames(
                f"sequence {s.seq_id or s.label!r} has {s.n_frames} frames; tau_trn={tau_trn} needs {tau_trn + 1}")
        f = s.frames
        by_class[s.label].append((f[-tau_trn:] - f[0]).T)
    cols, sizes = [], []
    for lab in labels:
        blocks = by_class.get(lab, [])
        if not blocks:
            raise InsufficientData(f"class {lab!r} has no training sequences")
        cols.extend(blocks)
        sizes.append(sum(b.shape[1] for b in blocks))
    return GroupedDictionary.build(np.hstack(cols), GroupPartition.contiguous(sizes), labels,
                                   meta={"tau_trn": tau_trn})


def build_test_unit(sequence: EmotionSequence, tau_tst: int) -> np.ndarray:
    """``d x tau_tst`` matrix ``[f_1, f_{T-tau_tst+2}, ..., f_T]`` of raw frames."""
    tau_tst = int(tau_tst)
    if tau_tst < 1:
        raise InvalidConfig(f"tau_tst must be positive, got {tau_tst}")
    T = sequence.n_frames
    if tau_tst > T:
        raise TooFewFrames(f"sequence has {T} frames, tau_tst={tau_tst}")
    f = sequence.frames
    idx = [0] + list(range(T - tau_tst + 1, T))
    return np.ascontiguousarray(f[idx].T)


def emotion_image(sequence: EmotionSequence) -> np.ndarray:
    """Neutral-subtracted single image ``f_T - f_1``."""
    return sequence.frames[-1] - sequence.frames[0]


def split_train_test(sequences: Sequence[EmotionSequence], per_class_train: int,
                     per_class_test: int, seed: int):
    """Stratified split without replacement, a pure function of ``seed``."""
    if per_class_train < 1 or per_class_test < 0:
        raise InvalidConfig("need per_class_train >= 1 and per_class_test >= 0")
    rng = np.random.default_rng(seed)
    by_class = defaultdict(list)
    for s in sequences:
        by_class[s.label].append(s)
    train, test = [], []
    for lab in sorted(by_class):
        pool = by_class[lab]
        need = per_class_train + per_class_test
        if need > len(pool):
            raise InsufficientData(f"class {lab!r} has {len(pool)} sequences, {need} requested")
        perm = rng.permutation(len(pool))
        train.extend(pool[i] for i in sorted(perm[:per_class_train]))
        test.extend(pool[i] for i in sorted(perm[per_class_train:need]))
    return train, test


# ---------------------------------------------------------------- synthetic data

@dataclass(frozen=True)
class SyntheticProblem:
    dictionary: GroupedDictionary
    y: np.ndarray
    x_true: np.ndarray
    l_true: np.ndarray
    active_class: int
    seed: int
    noise_sigma: float = 0.0


def generate_synthetic(seed: int, d: int = 128, per_class_atoms: int = 8, k: int = 7,
                       tau: int = 8, noise_sigma: float = 0.0, active_fraction: float = 0.25,
                       low_rank_ratio: float = 1.0) -> SyntheticProblem:
    """Random instance of ``Y = D X + L (+ noise)`` with known ``X`` and ``L``.

    * ``D``: Gaussian, unit columns, ``k`` contiguous groups of ``per_class_atoms``.
    * ``X``: one active class; each column uses ``ceil(active_fraction * per_class_atoms)``
      of that class's atoms with Gaussian weights.
    * ``L = u v^T``: rank one, ``||L||_F = low_rank_ratio * ||D X||_F``.
    * The clean ``Y`` is scaled to unit RMS entry, so ``noise_sigma`` is the
      noise-to-signal ratio of the added Gaussian noise.
    """
    if min(d, per_class_atoms, k, tau) < 1:
        raise InvalidConfig("d, per_class_atoms, k and tau must be positive")
    if noise_sigma < 0 or not 0 < active_fraction <= 1 or low_rank_ratio <= 0:
        raise InvalidConfig("need noise_sigma >= 0, active_fraction in (0, 1], low_rank_ratio > 0")
    rng = np.random.default_rng(seed)
    n = per_class_atoms * k
    dmat = rng.standard_normal((d, n))
    dmat /= np.linalg.norm(dmat, axis=0)
    active = int(rng.integers(k))
    m = int(np.ceil(active_fraction * per_class_atoms - 1e-12))
    x = np.zeros((n, tau))
    for j in range(tau):
        rows = active * per_class_atoms + rng.choice(per_class_atoms, m, replace=False)
        x[rows, j] = rng.standard_normal(m)
    u = rng.standard_normal(d)
    v = np.ones(tau)
    dx = dmat @ x
    l = np.outer(u, v)
    l *= low_rank_ratio * np.linalg.norm(dx) / np.linalg.norm(l)
    scale = np.sqrt(d * tau) / np.linalg.norm(dx + l)
    x *= scale
    l *= scale
    y = dmat @ x + l
    if noise_sigma > 0:
        y = y + noise_sigma * rng.standard_normal(y.shape)
    labels = CK_LABELS if k == len(CK_LABELS) else tuple(f"class{c}" for c in range(k))
    dictionary = GroupedDictionary(dmat, GroupPartition.contiguous([per_class_atoms] * k), labels)
    return SyntheticProblem(dictionary, y, x, l, active, int(seed), float(noise_sigma))


def generate_synthetic_sequences(seed: int, d: int = 128, k: int = 7, per_class: int = 15,
                                 n_frames: int = 10, noise_sigma: float = 0.01,
                                 emotion_rank: int = 2, emotion_amplitude: float = 0.15
                                 ) -> list[EmotionSequence]:
    """Synthetic stand-in for an expression-video dataset.

    Each class owns a random ``emotion_rank``-dimensional subspace.  A sequence
    has its own neutral face ``n`` and emotion ``e`` drawn from its class
    subspace (RMS entry ``emotion_amplitude``); frame ``t`` is
    ``n + (t / (T - 1)) e + noise``, so the first frame is exactly neutral up
    to noise.
    """
    if min(d, k, per_class, emotion_rank) < 1 or n_frames < 2:
        raise InvalidConfig("invalid synthetic sequence parameters")
    rng = np.random.default_rng(seed)
    mean_face = rng.uniform(0.3, 0.7, d)
    bases = [np.linalg.qr(rng.standard_normal((d, emotion_rank)))[0] for _ in range(k)]
    labels = CK_LABELS if k == len(CK_LABELS) else tuple(f"class{c}" for c in range(k))
    ramp = np.arange(n_frames) / (n_frames - 1)
    out = []
    for c in range(k):
        for s in range(per_class):
            neutral = mean_face + 0.1 * rng.standard_normal(d)
            e = bases[c] @ rng.standard_normal(emotion_rank)
            e *= emotion_amplitude * np.sqrt(d) / np.linalg.norm(e)
            frames = neutral[None, :] + ramp[:, None] * e[None, :]
            frames = frames + noise_sigma * rng.standard_normal(frames.shape)
            out.append(EmotionSequence(labels[c], frames, f"{labels[c]}_{s:03d}"))
    return out


# ---------------------------------------------------------------- persistence

def _write_manifest(path: Path, entries: dict) -> None:
    path.write_text("".join(f"{k}={v}\n" for k, v in entries.items()))


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidConfig(f"{path}: malformed manifest line {line!r}")
        out[key.strip()] = value.strip()
    return out


def save_dictionary(dictionary: GroupedDictionary, directory) -> Path:
    """Write ``atoms.csv`` and ``manifest.txt`` (labels, column groups, metadata)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_csv(directory / "atoms.csv", dictionary.atoms)
    entries = {
        "labels": ",".join(dictionary.labels),
        "column_groups": ",".join(str(g) for g in dictionary.partition.row_group),
    }
    entries.update({k: v for k, v in sorted(dictionary.meta.items())})
    _write_manifest(directory / "manifest.txt", entries)
    return directory


def load_dictionary(directory) -> GroupedDictionary:
    directory = Path(directory)
    atoms = read_csv(directory / "atoms.csv")
    man = read_manifest(directory / "manifest.txt")
    try:
        groups = [int(s) for s in man.pop("column_groups").split(",")]
        labels = man.pop("labels").split(",")
    except KeyError as exc:
        raise InvalidConfig(f"{directory}/manifest.txt lacks {exc}") from None
    meta = {k: int(v) if v.lstrip("-").isdigit() else v for k, v in man.items()}
    # stored atoms are already unit-norm; re-normalising would perturb the last bit
    return GroupedDictionary(atoms, GroupPartition.from_labels(groups), tuple(labels), meta)


def save_synthetic(problem: SyntheticProblem, directory, extra: dict | None = None) -> Path:
    directory = Path(directory)
    save_dictionary(problem.dictionary, directory / "dictionary")
    write_csv(directory / "Y.csv", problem.y)
    write_csv(directory / "X_true.csv", problem.x_true)
    write_csv(directory / "L_true.csv", problem.l_true)
    entries = {"seed": problem.seed, "active_class": problem.active_class,
               "active_label": problem.dictionary.labels[problem.active_class],
               "noise_sigma": repr(problem.noise_sigma)}
    entries.update(extra or {})
    _write_manifest(directory / "manifest.txt", entries)
    return directory

"""Multi-view sequence datasets: synthetic generation, frame stacking, splits and file I/O.

Binary layout of an ``MVSEQ1`` file (all integers little-endian)::

    b"MVSEQ1"
    uint32 n_utterances, uint32 d1, uint32 d2, uint8 has_labels
    per utterance:
        uint32 T1, uint32 T2, int32 speaker
        float32[T1 * d1] view 1 frames, row-major (frame by frame)
        float32[T2 * d2] view 2 frames
        int32[T1] labels            (only when has_labels)
"""
import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import AlignmentError, ConfigError, DimensionError, MalformedHeaderError, TruncatedFileError

MAGIC = b"MVSEQ1"
_DESC = struct.Struct("<IIIB")
_UTT = struct.Struct("<IIi")


@dataclass
class Utterance:
    view1: np.ndarray
    view2: np.ndarray
    labels: np.ndarray | None = None
    speaker: int = 0
    latent: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.view1.ndim != 2 or self.view2.ndim != 2:
            raise DimensionError("views must be (T, d) arrays")
        if len(self.view1) != len(self.view2):
            raise AlignmentError(f"view lengths differ: {len(self.view1)} vs {len(self.view2)}")
        if self.labels is not None and len(self.labels) != len(self.view1):
            raise AlignmentError("label count differs from the number of frames")

    def __len__(self):
        return len(self.view1)

    def __eq__(self, other):
        if not isinstance(other, Utterance):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None and other.labels is not None and np.array_equal(self.labels, other.labels)
        )
        return (
            self.speaker == other.speaker
            and np.array_equal(self.view1, other.view1)
            and np.array_equal(self.view2, other.view2)
            and same_labels
        )


@dataclass
class SequenceDataset:
    utterances: list

    def __post_init__(self):
        if self.utterances:
            d1, d2 = self.d1, self.d2
            labelled = self.utterances[0].labels is not None
            for u in self.utterances:
                if u.view1.shape[1] != d1 or u.view2.shape[1] != d2:
                    raise DimensionError("view dimensions differ across utterances")
                if (u.labels is not None) != labelled:
                    raise AlignmentError("labels must be present for all utterances or none")

    def __len__(self):
        return len(self.utterances)

    @property
    def d1(self):
        return self.utterances[0].view1.shape[1]

    @property
    def d2(self):
        return self.utterances[0].view2.shape[1]

    @property
    def has_labels(self):
        return bool(self.utterances) and self.utterances[0].labels is not None

    @property
    def n_frames(self):
        return sum(len(u) for u in self.utterances)

    def speakers(self):
        return sorted({u.speaker for u in self.utterances})

    def frames(self, view, context=0):
        """All frames of one view as a ``(features, n_frames)`` matrix, optionally context-stacked."""
        key = "view1" if view == 1 else "view2"
        return np.concatenate([stack_frames(getattr(u, key), context) for u in self.utterances], axis=0).T

    def labels(self):
        return np.concatenate([u.labels for u in self.utterances])

    def __eq__(self, other):
        if not isinstance(other, SequenceDataset):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self.utterances, other.utterances))


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings for a shared-latent two-view sequence corpus.

    Each utterance carries a latent ``z_t = mu[c_t] + a_t`` where ``c_t`` is a
    piecewise-constant class label and ``a_t`` a stationary unit-variance
    AR(1) process with coefficient ``rho``. View ``v`` is ``mix_v(z_t)`` plus
    independent Gaussian noise; mixing maps have orthonormal columns, and the
    nonlinear variant applies ``tanh(gain * .)`` to the linear mix.
    """

    latent_dim: int = 8
    d1: int = 39
    d2: int = 16
    mixing: str = "nonlinear"
    temporal: str = "smoothed"
    rho: float = 0.9
    noise_std1: float = 0.5
    noise_std2: float = 0.5
    n_classes: int = 10
    class_sep: float = 1.0
    utterance_count: int = 128
    n_speakers: int = 16
    length_range: tuple = (100, 300)
    segment_mean: float = 8.0
    nonlinear_gain: float = 1.5
    speaker_shift: float = 0.0
    pause_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("latent_dim", "d1", "d2", "n_classes", "utterance_count", "n_speakers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be positive")
        if self.mixing not in ("linear", "nonlinear"):
            raise ConfigError("mixing", "must be 'linear' or 'nonlinear'")
        if self.temporal not in ("iid", "smoothed"):
            raise ConfigError("temporal", "must be 'iid' or 'smoothed'")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho", "must lie in [0, 1)")
        if self.noise_std1 < 0:
            raise ConfigError("noise_std1", "must be non-negative")
        if self.noise_std2 < 0:
            raise ConfigError("noise_std2", "must be non-negative")
        lo, hi = self.length_range
        if lo < 1 or hi < lo:
            raise ConfigError("length_range", "must satisfy 1 <= min <= max")
        if not 0.0 <= self.pause_prob < 1.0:
            raise ConfigError("pause_prob", "must lie in [0, 1)")
        if self.segment_mean < 1:
            raise ConfigError("segment_mean", "must be at least 1")


def _orthonormal(rng, rows, cols):
    Q, R = np.linalg.qr(rng.standard_normal((max(rows, cols), min(rows, cols))))
    Q = Q * np.sign(np.diag(R))
    return Q if rows >= cols else Q.T


def _class_track(rng, spec, T):
    labels = np.empty(T, dtype=np.int32)
    t = 0
    while t < T:
        dur = int(rng.geometric(1.0 / spec.segment_mean))
        if spec.pause_prob > 0 and rng.random() < spec.pause_prob:
            c = spec.n_classes  # rest class
        else:
            c = int(rng.integers(spec.n_classes))
        labels[t:t + dur] = c
        t += dur
    return labels


def generate_synthetic(spec=None):
    """Draw a :class:`SequenceDataset` from ``spec``; equal specs give identical data."""
    spec = spec or SynthSpec()
    master = np.random.SeedSequence(spec.seed)
    global_seed, *utt_seeds = master.spawn(spec.utterance_count + 1)
    rng = np.random.default_rng(global_seed)
    L = spec.latent_dim
    A1 = _orthonormal(rng, spec.d1, L)
    A2 = _orthonormal(rng, spec.d2, L)
    means = np.zeros((spec.n_classes + 1, L))
    if spec.n_classes > 1:
        means[: spec.n_classes] = spec.class_sep * rng.standard_normal((spec.n_classes, L))
    shift1 = spec.speaker_shift * rng.standard_normal((spec.n_speakers, spec.d1))
    shift2 = spec.speaker_shift * rng.standard_normal((spec.n_speakers, spec.d2))
    rho = spec.rho if spec.temporal == "smoothed" else 0.0
    innov = np.sqrt(1.0 - rho * rho)

    def mix(A, z):
        lin = z @ A.T
        return np.tanh(spec.nonlinear_gain * lin) if spec.mixing == "nonlinear" else lin

    utterances = []
    for u, seed in enumerate(utt_seeds):
        r = np.random.default_rng(seed)
        T = int(r.integers(spec.length_range[0], spec.length_range[1] + 1))
        labels = _class_track(r, spec, T)
        eps = r.standard_normal((T, L))
        a = np.empty((T, L))
        a[0] = eps[0]
        for t in range(1, T):
            a[t] = rho * a[t - 1] + innov * eps[t]
        z = means[labels] + a
        rest = labels == spec.n_classes
        z[rest] = means[spec.n_classes]
        speaker = u % spec.n_speakers
        v1 = mix(A1, z) + shift1[speaker] + spec.noise_std1 * r.standard_normal((T, spec.d1))
        v2 = mix(A2, z) + shift2[speaker] + spec.noise_std2 * r.standard_normal((T, spec.d2))
        utterances.append(Utterance(v1.astype(np.float32), v2.astype(np.float32), labels, speaker, latent=z))
    return SequenceDataset(utterances)


def stack_frames(view, context):
    """Concatenate each frame with ``context`` zero-padded neighbours on both sides.

    Row ``t`` of the result is ``[x_{t-c}, ..., x_t, ..., x_{t+c}]``.
    """
    view = np.asarray(view)
    if context < 0:
        raise ValueError("context must be non-negative")
    if context == 0:
        return view
    T, d = view.shape
    padded = np.zeros((T + 2 * context, d), dtype=view.dtype)
    padded[context:context + T] = view
    return np.concatenate([padded[k:k + T] for k in range(2 * context + 1)], axis=1)


def split_speakers(dataset, train_ids, heldout_ids):
    """Partition utterances by speaker into ``(train, downstream)`` datasets."""
    train_ids, heldout_ids = set(train_ids), set(heldout_ids)
    if train_ids & heldout_ids:
        raise ValueError(f"speaker ids in both sets: {sorted(train_ids & heldout_ids)}")
    unknown = (train_ids | heldout_ids) - set(dataset.speakers())
    if unknown:
        raise ValueError(f"unknown speaker ids: {sorted(unknown)}")
    train = [u for u in dataset.utterances if u.speaker in train_ids]
    held = [u for u in dataset.utterances if u.speaker in heldout_ids]
    return SequenceDataset(train), SequenceDataset(held)


def save_dataset(dataset, path):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_DESC.pack(len(dataset), dataset.d1, dataset.d2, int(dataset.has_labels)))
        for u in dataset.utterances:
            fh.write(_UTT.pack(len(u.view1), len(u.view2), int(u.speaker)))
            fh.write(np.ascontiguousarray(u.view1, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(u.view2, dtype="<f4").tobytes())
            if dataset.has_labels:
                fh.write(np.ascontiguousarray(u.labels, dtype="<i4").tobytes())


def _read(fh, n):
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"expected {n} bytes, file ended after {len(buf)}")
    return buf


def load_dataset(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise MalformedHeaderError(f"{path}: not an MVSEQ1 file")
        n_utt, d1, d2, has_labels = _DESC.unpack(_read(fh, _DESC.size))
        if d1 == 0 or d2 == 0 or has_labels not in (0, 1):
            raise MalformedHeaderError(f"{path}: invalid descriptor")
        utterances = []
        for _ in range(n_utt):
            T1, T2, speaker = _UTT.unpack(_read(fh, _UTT.size))
            if T1 != T2:
                raise AlignmentError(f"{path}: utterance view lengths differ ({T1} vs {T2})")
            v1 = np.frombuffer(_read(fh, 4 * T1 * d1), dtype="<f4").reshape(T1, d1).astype(np.float32)
            v2 = np.frombuffer(_read(fh, 4 * T2 * d2), dtype="<f4").reshape(T2, d2).astype(np.float32)
            labels = np.frombuffer(_read(fh, 4 * T1), dtype="<i4").astype(np.int32) if has_labels else None
            utterances.append(Utterance(v1, v2, labels, speaker))
        if fh.read(1):
            raise MalformedHeaderError(f"{path}: trailing bytes after the last utterance")
    return SequenceDataset(utterances)


def export_csv(dataset, path):
    """One frame per line: view-1 features, view-2 features, then the label."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"x{j}" for j in range(dataset.d1)] + [f"y{j}" for j in range(dataset.d2)]
        writer.writerow(header + (["label"] if dataset.has_labels else []))
        for u in dataset.utterances:
            for t in range(len(u)):
                row = [repr(float(v)) for v in u.view1[t]] + [repr(float(v)) for v in u.view2[t]]
                if dataset.has_labels:
                    row.append(int(u.labels[t]))
                writer.writerow(row)

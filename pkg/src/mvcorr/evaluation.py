"""Downstream evaluation: k-NN classification, cross-view nearest-neighbour reconstruction, correlation captured."""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .cca import cca_transform, fit_cca
from .corr import CorrConfig, corr_captured
from .validation import check_pair, check_view

_CHUNK = 2048

# Row labels of the reconstruction table, in print order.
TABLE_ROWS = (
    ("Correlation Captured", "correlation_top_k"),
    ("Sum of NN Distances", "nn_distance_sum"),
    ("Reconstruction Error (L2 norm)", "reconstruction_error_total"),
    ("Per-Sample Error", "reconstruction_error_per_sample"),
    ("** Per-Vector-Per-Component Error", "reconstruction_error_per_vector_per_component"),
)


@dataclass(frozen=True)
class EvalReport:
    method: str
    knn_accuracy: float
    correlation_total: float
    correlation_top_k: float
    nn_distance_sum: float
    reconstruction_error_total: float
    reconstruction_error_per_sample: float
    reconstruction_error_per_vector_per_component: float
    k_reconstruction: int
    k_classification: int
    neighbors: int
    n_test: int

    def metrics_lines(self):
        return [f"{name}={float(value)!r}" if isinstance(value, float) else f"{name}={value}"
                for name, value in asdict(self).items()]

    def table(self, baseline=None):
        """Human-readable table; pass another report to print it as a side-by-side column."""
        cols = [baseline, self] if baseline is not None else [self]
        width = max(len(label) for label, _ in TABLE_ROWS) + 2
        lines = ["".ljust(width) + "".join(r.method.rjust(16) for r in cols)]
        for label, field in TABLE_ROWS:
            lines.append(label.ljust(width) + "".join(f"{getattr(r, field):16.4f}" for r in cols))
        lines.append(f"k-NN accuracy (%) [k={self.k_classification}, neighbors={self.neighbors}]".ljust(width)
                     + "".join(f"{r.knn_accuracy:16.2f}" for r in cols))
        return "\n".join(lines)


def parse_metrics(lines):
    """Inverse of :meth:`EvalReport.metrics_lines`."""
    fields = {}
    for line in lines:
        line = line.strip()
        if line:
            key, _, value = line.partition("=")
            fields[key] = value
    ints = {"k_reconstruction", "k_classification", "neighbors", "n_test"}
    typed = {k: (v if k == "method" else int(v) if k in ints else float(v)) for k, v in fields.items()}
    return EvalReport(**typed)


def _nearest(train, test, n_neighbors):
    """Indices ``(m, n_neighbors)`` of the nearest train columns, ties to the lower index."""
    out = np.empty((test.shape[1], n_neighbors), dtype=np.int64)
    dist = np.empty((test.shape[1], n_neighbors))
    for start in range(0, test.shape[1], _CHUNK):
        D = cdist(test[:, start:start + _CHUNK].T, train.T)
        if n_neighbors < D.shape[1]:
            part = np.argpartition(D, n_neighbors - 1, axis=1)[:, :n_neighbors]
            # argpartition does not respect index order among equal distances; widen to every candidate
            # at or below the cut-off distance and stable-sort those.
            cutoff = np.take_along_axis(D, part, axis=1).max(axis=1, keepdims=True)
            idx = np.empty((D.shape[0], n_neighbors), dtype=np.int64)
            for r in range(D.shape[0]):
                cand = np.flatnonzero(D[r] <= cutoff[r])
                idx[r] = cand[np.argsort(D[r, cand], kind="stable")][:n_neighbors]
        else:
            idx = np.argsort(D, axis=1, kind="stable")
        out[start:start + _CHUNK] = idx
        dist[start:start + _CHUNK] = np.take_along_axis(D, idx, axis=1)
    return out, dist


def knn_classify(train_feats, train_labels, test_feats, neighbors=4, test_labels=None):
    """Majority vote among the ``neighbors`` nearest training columns (Euclidean).

    Equal distances go to the lower training index; vote ties go to the
    lowest label. Returns ``(predictions, accuracy_percent)``, with accuracy
    ``None`` when ``test_labels`` is not given.
    """
    train_feats = check_view(train_feats, "train_feats")
    test_feats = check_view(test_feats, "test_feats")
    train_labels = np.asarray(train_labels)
    if train_feats.shape[1] == 0:
        raise ValueError("empty training set")
    if train_labels.shape != (train_feats.shape[1],):
        raise ValueError("train_labels must have one entry per training column")
    if not 1 <= neighbors <= train_feats.shape[1]:
        raise ValueError(f"neighbors={neighbors} must lie in [1, {train_feats.shape[1]}]")
    if test_feats.shape[0] != train_feats.shape[0]:
        raise ValueError("train and test features have different dimensions")
    idx, _ = _nearest(train_feats, test_feats, neighbors)
    classes, codes = np.unique(train_labels, return_inverse=True)
    votes = np.zeros((idx.shape[0], classes.size), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(idx.shape[0]), neighbors), codes[idx].ravel()), 1)
    pred = classes[np.argmax(votes, axis=1)]
    return pred, (None if test_labels is None else accuracy(pred, test_labels))


def accuracy(predictions, labels):
    """Percentage of matching entries."""
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be non-empty and equally shaped")
    return 100.0 * float(np.mean(predictions == labels))


@dataclass(frozen=True)
class ReconstructionStats:
    nn_distance_sum: float
    error_total: float
    error_per_sample: float
    error_per_vector_per_component: float


def nn_reconstruct(shared_train_v1, train_v2, shared_test_v1, test_v2=None):
    """Reconstruct view 2 of each test column from its nearest training neighbour in the shared space.

    Returns ``(reconstructions (d2, m), stats)``; ``stats`` is ``None`` when
    no ground-truth ``test_v2`` is given. The per-component error divides the
    per-sample error by the shared dimension.
    """
    shared_train_v1, train_v2 = check_pair(shared_train_v1, train_v2)
    shared_test_v1 = check_view(shared_test_v1, "shared_test_v1")
    if shared_test_v1.shape[0] != shared_train_v1.shape[0]:
        raise ValueError("train and test shared representations have different dimensions")
    idx, dist = _nearest(shared_train_v1, shared_test_v1, 1)
    recon = train_v2[:, idx[:, 0]]
    if test_v2 is None:
        return recon, None
    test_v2 = check_view(test_v2, "test_v2")
    if test_v2.shape != recon.shape:
        raise ValueError(f"test_v2 has shape {test_v2.shape}, expected {recon.shape}")
    total = float(np.sum(np.linalg.norm(recon - test_v2, axis=0)))
    per_sample = total / recon.shape[1]
    stats = ReconstructionStats(float(dist.sum()), total, per_sample, per_sample / shared_test_v1.shape[0])
    return recon, stats


@dataclass(frozen=True)
class EvalConfig:
    k_reconstruction: int = 20
    k_classification: int = 60
    neighbors: int = 4
    test_size: int = 10000
    reg: float = 1e-4
    context: int = 3
    seed: int = 0


def _split(n, test_size, seed):
    perm = np.random.default_rng([seed, 7]).permutation(n)
    n_test = min(test_size, n // 2)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def evaluate_pipeline(rep1, rep2, dataset, cfg=None, method="baseline"):
    """Run the downstream tasks on ``dataset`` through per-view representation functions.

    ``rep1(dataset)`` and ``rep2(dataset)`` return one column per frame.
    Frames are split (seeded) into a training part, on which linear CCA
    builds the shared space, and a test part of at most ``cfg.test_size``
    frames. Correlation captured is measured on the test frames: the total
    over every representation dimension, and over the shared space.
    Reconstruction targets are the raw view-2 frames.
    """
    cfg = cfg or EvalConfig()
    F = np.asarray(rep1(dataset), dtype=float)
    G = np.asarray(rep2(dataset), dtype=float)
    if F.shape[1] != dataset.n_frames or G.shape[1] != dataset.n_frames:
        raise ValueError("representations must return one column per frame")
    raw2 = dataset.frames(2, 0)
    tr, te = _split(dataset.n_frames, cfg.test_size, cfg.seed)
    corr_cfg = CorrConfig(cfg.reg, cfg.reg)
    kmax = min(F.shape[0], G.shape[0])
    k_rec = min(cfg.k_reconstruction, kmax)
    k_cls = min(cfg.k_classification, kmax)

    model = fit_cca(F[:, tr], G[:, tr], max(k_rec, k_cls), cfg.reg, cfg.reg)
    P1 = cca_transform(model, F, 1)
    P2 = cca_transform(model, G, 2)

    total, _ = corr_captured(F[:, te], G[:, te], corr_cfg)
    _, top = corr_captured(P1[:k_rec, te], P2[:k_rec, te], corr_cfg, k_rec)
    _, stats = nn_reconstruct(P1[:k_rec, tr], raw2[:, tr], P1[:k_rec, te], raw2[:, te])

    acc = float("nan")
    if dataset.has_labels:
        labels = dataset.labels()
        _, acc = knn_classify(P1[:k_cls, tr], labels[tr], P1[:k_cls, te], cfg.neighbors, labels[te])
    return EvalReport(
        method=method,
        knn_accuracy=acc,
        correlation_total=total,
        correlation_top_k=top,
        nn_distance_sum=stats.nn_distance_sum,
        reconstruction_error_total=stats.error_total,
        reconstruction_error_per_sample=stats.error_per_sample,
        reconstruction_error_per_vector_per_component=stats.error_per_vector_per_component,
        k_reconstruction=k_rec,
        k_classification=k_cls,
        neighbors=cfg.neighbors,
        n_test=int(te.size),
    )

"""End-to-end acceptance criteria; each prints one PASS/FAIL line."""
import time

import numpy as np
import pytest

from mvcorr import gradcheck
from mvcorr.cca import fit_cca
from mvcorr.cli import main
from mvcorr.corr import CorrConfig, corr_objective
from mvcorr.data import SynthSpec, generate_synthetic, load_dataset, save_dataset, split_speakers
from mvcorr.evaluation import EvalConfig, evaluate_pipeline
from mvcorr.kcca import KernelSpec, fit_kcca
from mvcorr.linalg import center_columns, covariance, inv_sqrt_psd, sym_eig
from mvcorr.modelio import dumps, load_model, save_model
from mvcorr.nn import mlp_forward
from mvcorr.pipeline import ModelConfig, fit_method, representations
from mvcorr.train import TrainConfig, build_mlp, train_dcca


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail
    return emit


def _whitened_cross(F, G, cfg):
    Fc, _ = center_columns(F)
    Gc, _ = center_columns(G)
    return inv_sqrt_psd(covariance(Fc, Fc, cfg.r_x)) @ covariance(Fc, Gc) @ inv_sqrt_psd(covariance(Gc, Gc, cfg.r_y))


def _linear_views(rng, n, dx=6, dy=5, latent=3):
    z = rng.standard_normal((latent, n))
    X = rng.standard_normal((dx, latent)) @ z + rng.standard_normal((dx, n))
    Y = rng.standard_normal((dy, latent)) @ z + rng.standard_normal((dy, n))
    return X, Y


def test_1_objective_matches_both_routes(report):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    cfg = CorrConfig()
    worst_svd = worst_eig = 0.0
    for _ in range(100):
        F = rng.standard_normal((5, 50))
        G = 0.5 * F + rng.standard_normal((5, 50))
        value = corr_objective(F, G, cfg).corr
        T = _whitened_cross(F, G, cfg)
        by_svd = np.linalg.svd(T, compute_uv=False).sum()
        by_eig = np.sqrt(np.clip(sym_eig(T.T @ T).eigenvalues, 0, None)).sum()
        worst_svd = max(worst_svd, abs(value - by_svd))
        worst_eig = max(worst_eig, abs(value - by_eig))
    elapsed = time.perf_counter() - start
    ok = worst_svd < 1e-8 and worst_eig < 1e-8 and elapsed < 10
    report(1, "correlation objective", ok,
           f"max |value - svd| = {worst_svd:.2e}, max |value - eig| = {worst_eig:.2e}, {elapsed:.2f} s")


def test_2_gradient_gates(report):
    start = time.perf_counter()
    results = [
        gradcheck.run_gradcheck("corr", o=4, m=32),
        gradcheck.run_gradcheck("mlp"),
        gradcheck.run_gradcheck("lstm", T=5),
        gradcheck.run_gradcheck("bilstm"),
        gradcheck.run_gradcheck("splitae"),
    ]
    elapsed = time.perf_counter() - start
    ok = all(r.max_rel_error < 1e-4 for r in results) and elapsed < 60
    detail = ", ".join(f"{r.method} {r.max_rel_error:.1e}" for r in results)
    report(2, "gradient gates", ok, f"{detail}; {elapsed:.2f} s")


def test_3a_linear_kcca_reproduces_cca(report):
    rng = np.random.default_rng(3)
    X, Y = _linear_views(rng, 200)
    r = 1e-3
    cca = fit_cca(X, Y, 4, r, r).corrs
    linear = KernelSpec("linear")
    kcca = fit_kcca(X, Y, 4, 199 * r, 199 * r, linear, linear).corrs
    gap = float(np.max(np.abs(cca - kcca)))
    report("3a", "linear KCCA equals CCA", gap < 1e-4, f"max |corr gap| = {gap:.2e}")


def test_3b_linear_dcca_approaches_cca(report):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    X, Y = _linear_views(rng, 2000)
    init = np.random.default_rng(0)
    n1 = build_mlp([6, 3], ["identity"], "uniform", init)
    n2 = build_mlp([5, 3], ["identity"], "uniform", init)
    cfg = TrainConfig(batch_size=500, epochs=200, learning_rate=1e-2, steps_per_epoch=5, seed=1)
    a, b, _ = train_dcca(n1, n2, X, Y, cfg, CorrConfig())
    got = corr_objective(mlp_forward(a, X)[0], mlp_forward(b, Y)[0], CorrConfig()).corr
    ref = fit_cca(X, Y, 3, 1e-4, 1e-4).corrs.sum()
    elapsed = time.perf_counter() - start
    ok = abs(got - ref) <= 0.02 * ref and elapsed < 120
    report("3b", "linear DCCA approaches CCA", ok,
           f"DCCA {got:.4f} vs CCA {ref:.4f} ({100 * abs(got - ref) / ref:.2f}%), {elapsed:.1f} s")


def test_4_cca_constraints(report):
    rng = np.random.default_rng(5)
    X, Y = _linear_views(rng, 500, dx=8, dy=6)
    r_x, r_y = 1e-3, 1e-2
    m = fit_cca(X, Y, 6, r_x, r_y)
    Xc, _ = center_columns(X)
    Yc, _ = center_columns(Y)
    ex = np.max(np.abs(m.U.T @ covariance(Xc, Xc, r_x) @ m.U - np.eye(6)))
    ey = np.max(np.abs(m.V.T @ covariance(Yc, Yc, r_y) @ m.V - np.eye(6)))
    in_range = bool(np.all((m.corrs >= 0) & (m.corrs <= 1 + 1e-8)))
    report(4, "CCA constraints", ex < 1e-6 and ey < 1e-6 and in_range,
           f"U error {ex:.1e}, V error {ey:.1e}, corrs in [0, 1]: {in_range}")


def test_5_analytic_recovery(report):
    start = time.perf_counter()
    spec = SynthSpec(latent_dim=1, d1=1, d2=1, mixing="linear", temporal="iid", noise_std1=1.0, noise_std2=1.0,
                     n_classes=1, utterance_count=500, length_range=(200, 200), seed=5)
    ds = generate_synthetic(spec)
    rho = fit_cca(ds.frames(1), ds.frames(2), 1, 0.0, 0.0).corrs[0]
    elapsed = time.perf_counter() - start
    ok = ds.n_frames == 100_000 and abs(rho - 0.5) <= 0.02 and elapsed < 30
    report(5, "analytic recovery", ok, f"estimate {rho:.4f} on {ds.n_frames} frames (population 0.5), {elapsed:.1f} s")


@pytest.mark.slow
def test_6_dcclstm_beats_linear_cca(report):
    ds = generate_synthetic(SynthSpec())
    train, downstream = split_speakers(ds, range(4), range(4, 16))
    start = time.perf_counter()
    tc = TrainConfig(batch_size=200, epochs=5, learning_rate=1e-3, steps_per_epoch=40, clip_threshold=10.0, seed=0)
    lstm, _ = fit_method("dcclstm", train, ModelConfig(), tc, CorrConfig(1e-3, 1e-3))
    train_time = time.perf_counter() - start
    base, _ = fit_method("baseline", train)
    cfg = EvalConfig()
    r = evaluate_pipeline(*representations(lstm), downstream, cfg, method="dcclstm")
    b = evaluate_pipeline(*representations(base), downstream, cfg, method="baseline")
    ok = (r.correlation_top_k > b.correlation_top_k
          and r.reconstruction_error_total < b.reconstruction_error_total
          and train_time <= 15 * 60)
    report(6, "DCC-LSTM vs linear CCA", ok,
           f"correlation captured {r.correlation_top_k:.3f} vs {b.correlation_top_k:.3f}; "
           f"reconstruction error {r.reconstruction_error_total:.1f} vs {b.reconstruction_error_total:.1f}; "
           f"training {train_time:.0f} s")


def test_7_gaussian_kcca_detects_circle(report):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    theta = rng.uniform(0, 2 * np.pi, 500)
    X, Y = theta[None, :], np.vstack([np.cos(theta), np.sin(theta)])
    lin = fit_cca(X, Y, 1, 1e-4, 1e-4).corrs[0]
    gauss = fit_kcca(X, Y, 1, kernel_x=KernelSpec("gaussian"), kernel_y=KernelSpec("gaussian")).corrs[0]
    elapsed = time.perf_counter() - start
    ok = gauss - lin >= 0.2 and elapsed < 30
    report(7, "nonlinearity detection", ok, f"Gaussian KCCA {gauss:.4f} vs linear CCA {lin:.4f}, {elapsed:.1f} s")


def test_8_batch_gap_shrinks(report):
    rng = np.random.default_rng(8)
    X, Y = _linear_views(rng, 20_000, dx=10, dy=8, latent=4)
    init = np.random.default_rng(0)
    net1 = build_mlp([10, 16, 5], ["sigmoid", "identity"], "orthogonal", init)
    net2 = build_mlp([8, 16, 5], ["sigmoid", "identity"], "orthogonal", init)
    F, G = mlp_forward(net1, X)[0], mlp_forward(net2, Y)[0]
    cfg = CorrConfig()
    full = corr_objective(F, G, cfg).corr
    gaps = {}
    for m in (50, 100, 200):
        diffs = []
        for trial in range(20):
            idx = np.random.default_rng([trial, m]).integers(0, X.shape[1], m)
            diffs.append(abs(corr_objective(F[:, idx], G[:, idx], cfg).corr - full))
        gaps[m] = float(np.mean(diffs))
    ok = gaps[50] > gaps[100] > gaps[200]
    report(8, "batch-size consistency", ok,
           f"full {full:.4f}; mean gap " + ", ".join(f"m={m}: {g:.4f}" for m, g in gaps.items()))


def test_9_determinism(report, tmp_path):
    common = ["--seed", "11", "--set", "synth.utterance_count=32", "--set", "synth.length_range=20,30",
              "--set", "method=dcclstm", "--set", "model.hidden_sizes=6", "--set", "model.output_size=4",
              "--set", "model.window=5", "--set", "train.epochs=2", "--set", "train.steps_per_epoch=2",
              "--set", "train.batch_size=16", "--set", "train.eval_size=40"]
    files = {}
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["generate", "--out", str(out), *common]) == 0
        data = ["--set", f"data.path={out / 'dataset.mvseq'}"]
        assert main(["train", "--out", str(out), *common, *data]) == 0
        assert main(["evaluate", "--out", str(out), *common, *data]) == 0
        files[run] = {n: (out / n).read_bytes() for n in ("dataset.mvseq", "model.mvmdl", "history.csv", "metrics.txt")}
    same_cli = files["a"] == files["b"]

    ds = load_dataset(tmp_path / "a" / "dataset.mvseq")
    save_dataset(ds, tmp_path / "copy.mvseq")
    data_exact = (tmp_path / "copy.mvseq").read_bytes() == files["a"]["dataset.mvseq"] \
        and load_dataset(tmp_path / "copy.mvseq") == ds
    bundle = load_model(tmp_path / "a" / "model.mvmdl")
    save_model(bundle, tmp_path / "copy.mvmdl")
    reloaded = load_model(tmp_path / "copy.mvmdl")
    model_exact = dumps(reloaded) == files["a"]["model.mvmdl"] and all(
        np.array_equal(f(ds), g(ds)) for f, g in zip(representations(bundle), representations(reloaded)))
    report(9, "determinism", same_cli and data_exact and model_exact,
           f"CLI outputs identical: {same_cli}; dataset round trip exact: {data_exact}; "
           f"model round trip exact: {model_exact}")


def test_10_knn_on_separated_clusters(report):
    spec = SynthSpec(n_classes=4, class_sep=10.0, mixing="linear", temporal="iid", utterance_count=64,
                     length_range=(50, 80), seed=10)
    ds = generate_synthetic(spec)
    train, downstream = split_speakers(ds, range(4), range(4, 16))
    bundle, _ = fit_method("cca", train, ModelConfig(k=20))
    r = evaluate_pipeline(*representations(bundle), downstream, EvalConfig(neighbors=4), method="cca")
    report(10, "k-NN on separated clusters", r.knn_accuracy >= 95.0,
           f"accuracy {r.knn_accuracy:.2f}% on {r.n_test} test frames with neighbors={r.neighbors}")

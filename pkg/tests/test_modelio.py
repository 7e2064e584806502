import dataclasses

import numpy as np
import pytest

from mvcorr.corr import CorrConfig
from mvcorr.data import SynthSpec, generate_synthetic
from mvcorr.exceptions import MalformedHeaderError, TruncatedFileError
from mvcorr.modelio import ModelBundle, dataset_fingerprint, dumps, load_model, loads, save_model
from mvcorr.pipeline import METHODS, ModelConfig, fit_method, representations
from mvcorr.train import TrainConfig


@pytest.fixture(scope="module")
def dataset():
    return generate_synthetic(SynthSpec(utterance_count=6, n_speakers=2, length_range=(25, 30), d1=4, d2=3,
                                        latent_dim=2))


def _fit(method, dataset, **model):
    mc = ModelConfig(context=1, k=3, hidden_sizes=(4,), output_size=3, window=5, kcca_max_samples=60, **model)
    tc = TrainConfig(batch_size=20, epochs=1, steps_per_epoch=2, seq_len_range=(4, 8), eval_size=30)
    return fit_method(method, dataset, mc, tc, CorrConfig())[0]


def _same(a, b):
    if isinstance(a, np.ndarray):
        return isinstance(b, np.ndarray) and a.dtype == b.dtype and np.array_equal(a, b)
    if dataclasses.is_dataclass(a):
        return type(a) is type(b) and all(_same(getattr(a, f.name), getattr(b, f.name))
                                          for f in dataclasses.fields(a))
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return a == b


@pytest.mark.parametrize("method", METHODS)
def test_round_trip_bit_exact(method, dataset, tmp_path):
    bundle = _fit(method, dataset)
    save_model(bundle, tmp_path / "m.mvmdl")
    back = load_model(tmp_path / "m.mvmdl")
    assert _same(bundle, back)
    for f, g in zip(representations(bundle), representations(back)):
        assert np.array_equal(f(dataset), g(dataset))
    assert dumps(back) == dumps(bundle)


def test_pair_splitae_round_trip(dataset):
    bundle = _fit("splitae", dataset, architecture="pair")
    assert _same(loads(dumps(bundle)), bundle)


def test_special_floats_survive():
    b = ModelBundle("baseline", {"x": np.array([np.nan, np.inf, -0.0])}, {"v": 0.1 + 0.2})
    back = loads(dumps(b))
    assert back.settings["v"] == 0.1 + 0.2
    assert np.array_equal(back.parts["x"], b.parts["x"], equal_nan=True)
    assert np.signbit(back.parts["x"][2])


class TestCorruption:
    def _buf(self, dataset):
        return dumps(_fit("cca", dataset))

    def test_bad_magic(self, dataset):
        with pytest.raises(MalformedHeaderError):
            loads(b"XX" + self._buf(dataset)[2:])

    def test_bad_version(self, dataset):
        buf = bytearray(self._buf(dataset))
        buf[6:10] = np.uint32(9).tobytes()
        with pytest.raises(MalformedHeaderError):
            loads(bytes(buf))

    def test_garbled_header(self, dataset):
        buf = bytearray(self._buf(dataset))
        buf[14] = ord("}")
        with pytest.raises(MalformedHeaderError):
            loads(bytes(buf))

    @pytest.mark.parametrize("cut", [8, 40, -3])
    def test_truncated(self, dataset, cut):
        with pytest.raises(TruncatedFileError):
            loads(self._buf(dataset)[:cut])

    def test_trailing_bytes(self, dataset):
        with pytest.raises(MalformedHeaderError):
            loads(self._buf(dataset) + b"\0")

    def test_unknown_type(self):
        class Foreign:
            pass
        with pytest.raises(TypeError):
            dumps(ModelBundle("baseline", {"x": Foreign()}, {}))


def test_fingerprint_tracks_content(dataset):
    other = generate_synthetic(SynthSpec(utterance_count=6, n_speakers=2, length_range=(25, 30), d1=4, d2=3,
                                         latent_dim=2, seed=1))
    assert dataset_fingerprint(dataset) == dataset_fingerprint(dataset)
    assert dataset_fingerprint(dataset) != dataset_fingerprint(other)

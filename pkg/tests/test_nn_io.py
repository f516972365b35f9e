"""Model container round-trip and corruption checks."""

import numpy as np
import pytest

from beamvista.errors import CorruptionError, FormatError
from beamvista.nn import build_drone_net, clone_network, load_model, save_model


def make_net(dtype=np.float64):
    net = build_drone_net(8, input_shape=(3, 16, 16), seed=5, dtype=dtype)
    net.input_mean = np.array([0.1, 0.2, 0.3])
    net.input_std = np.array([0.4, 0.5, 0.6])
    return net


class TestRoundTrip:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_bit_exact(self, tmp_path, dtype):
        net = make_net(dtype)
        p = tmp_path / "m.vwnn"
        save_model(net, p)
        back = load_model(p)
        assert back.dtype == net.dtype
        params, orig = back.parameters(), net.parameters()
        assert sorted(params) == sorted(orig)
        for k in orig:
            assert params[k].dtype == orig[k].dtype
            np.testing.assert_array_equal(params[k], orig[k])
        np.testing.assert_array_equal(back.input_mean, net.input_mean)
        np.testing.assert_array_equal(back.input_std, net.input_std)

    def test_forward_agrees(self, tmp_path):
        net = make_net()
        p = tmp_path / "m.vwnn"
        save_model(net, p)
        back = load_model(p)
        x = np.random.default_rng(0).random((2, 3, 16, 16))
        np.testing.assert_array_equal(back.forward(back.normalize(x)),
                                      net.forward(net.normalize(x)))

    def test_without_normalization_stats(self, tmp_path):
        net = build_drone_net(8, input_shape=(3, 16, 16), seed=5)
        p = tmp_path / "m.vwnn"
        save_model(net, p)
        back = load_model(p)
        assert back.input_mean is None and back.input_std is None

    def test_two_saves_identical(self, tmp_path):
        net = make_net()
        a, b = tmp_path / "a.vwnn", tmp_path / "b.vwnn"
        save_model(net, a)
        save_model(net, b)
        assert a.read_bytes() == b.read_bytes()

    def test_clone_is_independent(self):
        net = make_net()
        twin = clone_network(net)
        x = np.random.default_rng(1).random((2, 3, 16, 16))
        np.testing.assert_array_equal(twin.forward(twin.normalize(x)),
                                      net.forward(net.normalize(x)))
        twin.layers[0].w[:] = 0.0
        assert net.layers[0].w.any()


class TestCorruption:
    def _saved(self, tmp_path):
        p = tmp_path / "m.vwnn"
        save_model(make_net(), p)
        return p

    def test_bad_magic(self, tmp_path):
        p = self._saved(tmp_path)
        raw = bytearray(p.read_bytes())
        raw[:4] = b"XXXX"
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_model(p)

    def test_bad_version(self, tmp_path):
        p = self._saved(tmp_path)
        raw = bytearray(p.read_bytes())
        raw[4] = 0x7F
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_model(p)

    def test_payload_flip(self, tmp_path):
        p = self._saved(tmp_path)
        raw = bytearray(p.read_bytes())
        raw[len(raw) // 2] ^= 0x01
        p.write_bytes(bytes(raw))
        with pytest.raises((CorruptionError, FormatError)):
            load_model(p)

    def test_truncation(self, tmp_path):
        p = self._saved(tmp_path)
        raw = p.read_bytes()
        p.write_bytes(raw[:-7])
        with pytest.raises((CorruptionError, FormatError)):
            load_model(p)

    def test_fuzz_single_byte(self, tmp_path):
        p = self._saved(tmp_path)
        raw = p.read_bytes()
        rng = np.random.default_rng(3)
        for _ in range(25):
            i = int(rng.integers(len(raw)))
            mut = bytearray(raw)
            mut[i] ^= int(rng.integers(1, 256))
            p.write_bytes(bytes(mut))
            with pytest.raises((CorruptionError, FormatError)):
                load_model(p)

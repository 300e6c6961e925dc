import struct

import numpy as np
import pytest

from edge_inpaint import networks as nw
from edge_inpaint.errors import ShapeError, WeightArchiveError, WeightMismatchError


def conv_count(k, cin, cout, norm=True):
    return k * k * cin * cout + cout + (2 * cout if norm else 0)


def test_edge_generator_parameter_count():
    expected = (
        conv_count(7, 3, 64)
        + conv_count(4, 64, 128)
        + conv_count(4, 128, 256)
        + 8 * 2 * conv_count(3, 256, 256)
        + conv_count(4, 256, 128)
        + conv_count(4, 128, 64)
        + conv_count(7, 64, 1, norm=False)
    )
    assert expected == 10_774_657
    assert nw.build_generator("edge").parameter_count() == expected


class TestArchitecture:
    @pytest.fixture
    def g1(self):
        return nw.build_generator("edge")

    @pytest.fixture
    def g2(self):
        return nw.build_generator("inpaint")

    def test_conv_layer_count(self, g1, g2):
        assert len(g1.conv_layers()) == 22
        assert len(g2.conv_layers()) == 22

    def test_final_activations(self, g1, g2):
        assert g1.layers[-1].activation.kind == "sigmoid"
        assert g2.layers[-1].activation.kind == "scaled_tanh"
        assert (g1.out_channels, g2.out_channels) == (1, 3)
        assert (g1.in_channels, g2.in_channels) == (3, 4)

    def test_spectral_norm_placement(self, g1, g2):
        assert len(g2.spectral_layers()) == 0
        assert not g2.spectral
        assert len(g1.spectral_layers()) == 22

    def test_residual_blocks(self, g1):
        blocks = [layer for layer in g1.layers if layer.kind == "residual"]
        assert len(blocks) == 8
        for b in blocks:
            assert [s.dilation for s in b.sublayers] == [2, 1]
            assert all(s.out_c == 256 and s.kernel_size == 3 for s in b.sublayers)
            assert b.sublayers[1].activation is None

    def test_generator_sequence(self, g1):
        head = [(l.kernel_size, l.out_c, l.stride, l.padding_mode) for l in g1.layers[:3]]
        assert head == [(7, 64, 1, "reflect"), (4, 128, 2, "zero"), (4, 256, 2, "zero")]
        ups = [l for l in g1.layers if l.kind == "conv_transpose"]
        assert [(l.in_c, l.stride) for l in ups] == [(128, 2), (64, 2)]

    def test_discriminator(self):
        for kind, cin in (("edge", 2), ("inpaint", 4)):
            d = nw.build_discriminator(kind)
            assert d.in_channels == cin
            assert [l.stride for l in d.layers] == [2, 2, 2, 1, 1]
            assert [l.out_c for l in d.layers] == [64, 128, 256, 512, 1]
            assert all(l.kernel_size == 4 for l in d.layers)
            assert all(l.activation.slope == 0.2 for l in d.layers[:-1])
            assert d.layers[-1].activation.kind == "sigmoid"
            assert not any(l.instance_norm for l in d.layers)


class TestForward:
    @pytest.mark.parametrize("kind,cin,cout", [("edge", 3, 1), ("inpaint", 4, 3)])
    @pytest.mark.parametrize("size", [64, 128])
    def test_generator_shape_preserving(self, kind, cin, cout, size, rng):
        g = nw.build_generator(kind)
        x = rng.random((1, cin, size, size))
        out, _ = nw.forward(g, x)
        assert out.shape == (1, cout, size, size)
        assert out.min() >= 0 and out.max() <= 1

    @pytest.mark.parametrize("size,grid", [(256, 30), (128, 14)])
    def test_discriminator_grid(self, size, grid, rng):
        d = nw.build_discriminator("edge")
        out, _ = nw.forward(d, rng.random((1, 2, size, size)))
        assert out.shape == (1, 1, grid, grid)

    def test_zero_weight_g2_is_half(self, rng):
        g2 = nw.build_generator("inpaint")
        for k in g2.params:
            if k.endswith(".weight"):
                g2.params[k] = np.zeros_like(g2.params[k])
        out, _ = nw.forward(g2, rng.random((1, 4, 64, 64)))
        np.testing.assert_array_equal(out, 0.5)

    def test_capture(self, rng):
        d = nw.build_discriminator("inpaint")
        out, acts = nw.forward(d, rng.random((2, 4, 64, 64)), capture=True)
        assert len(acts) == len(d.layers) == 5
        assert acts[-1].tensor is out
        for a in acts:
            assert a.count == np.prod(a.tensor.shape)
        g = nw.build_generator("edge")
        _, acts = nw.forward(g, rng.random((1, 3, 32, 32)), capture=True)
        assert [a.layer for a in acts] == [l.name for l in g.layers]
        _, none = nw.forward(g, rng.random((1, 3, 32, 32)))
        assert none is None

    def test_indivisible(self):
        g = nw.build_generator("edge")
        with pytest.raises(ShapeError, match="divisible"):
            nw.forward(g, np.zeros((1, 3, 30, 32)))

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError, match="channels"):
            nw.forward(nw.build_discriminator("edge"), np.zeros((1, 3, 32, 32)))

    def test_forward_is_pure(self, rng):
        g = nw.build_generator("edge")
        before = {k: s.u.copy() for k, s in g.spectral.items()}
        x = rng.random((1, 3, 32, 32))
        a, _ = nw.forward(g, x)
        b, _ = nw.forward(g, x)
        np.testing.assert_array_equal(a, b)
        for k, s in g.spectral.items():
            np.testing.assert_array_equal(s.u, before[k])

    def test_update_spectral_states(self):
        d = nw.build_discriminator("edge")
        key = "C64.weight"
        before = d.spectral[key].u.copy()
        top = np.linalg.svd(d.params[key].reshape(64, -1).astype(np.float64), compute_uv=False)[0]
        nw.update_spectral_states(d, iterations=5)
        early = d.spectral[key]
        assert not np.array_equal(before, early.u)
        assert abs(np.linalg.norm(early.u.astype(np.float64)) - 1) < 1e-6
        assert early.sigma <= top * (1 + 1e-9)
        # gaussian init has a small top gap, so convergence needs many steps
        nw.update_spectral_states(d, iterations=2000)
        assert d.spectral[key].sigma == pytest.approx(top, rel=1e-3)


class TestWeights:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        g = nw.build_generator("edge", seed=5)
        nw.update_spectral_states(g, 3)
        path = tmp_path / "g1.ecwt"
        nw.save_weights(g, path)
        fresh = nw.load_weights(nw.build_generator("edge", seed=99), path)
        for k, v in g.params.items():
            np.testing.assert_array_equal(fresh.params[k], v)
        x = rng.random((1, 3, 32, 32))
        np.testing.assert_array_equal(nw.forward(g, x)[0], nw.forward(fresh, x)[0])

    def test_header_layout(self, tmp_path):
        d = nw.build_discriminator("edge")
        path = tmp_path / "d.ecwt"
        nw.save_weights(d, path)
        raw = path.read_bytes()
        assert raw[:4] == b"ECWT"
        version, count = struct.unpack("<II", raw[4:12])
        assert version == 1
        assert count == len(d.params) + len(d.spectral)
        (nlen,) = struct.unpack("<H", raw[12:14])
        name = raw[14:14 + nlen].decode()
        assert name == "C64.weight"
        rank = raw[14 + nlen]
        dims = struct.unpack("<4I", raw[15 + nlen:31 + nlen])
        assert (rank, dims) == (4, (64, 2, 4, 4))
        first = np.frombuffer(raw[31 + nlen:31 + nlen + 16], dtype="<f4")
        np.testing.assert_array_equal(first, d.params["C64.weight"].reshape(-1)[:4])

    def _tamper(self, tmp_path, fn):
        from edge_inpaint.archive import read_archive, write_archive

        d = nw.build_discriminator("edge")
        path = tmp_path / "d.ecwt"
        nw.save_weights(d, path)
        tensors = read_archive(path)
        fn(tensors)
        write_archive(tensors, path)
        return d, path

    def test_missing_tensor(self, tmp_path):
        d, path = self._tamper(tmp_path, lambda t: t.pop("C256.bias"))
        with pytest.raises(WeightMismatchError, match="C256.bias"):
            nw.load_weights(d, path)

    def test_transposed_shape(self, tmp_path):
        def swap(t):
            t["C128.weight"] = np.ascontiguousarray(t["C128.weight"].transpose(1, 0, 2, 3))

        d, path = self._tamper(tmp_path, swap)
        with pytest.raises(WeightMismatchError, match="shape"):
            nw.load_weights(d, path)

    def test_unexpected_tensor(self, tmp_path):
        d, path = self._tamper(tmp_path, lambda t: t.update(extra=np.zeros(2, np.float32)))
        with pytest.raises(WeightMismatchError, match="extra"):
            nw.load_weights(d, path)

    def test_truncated(self, tmp_path):
        d = nw.build_discriminator("edge")
        path = tmp_path / "d.ecwt"
        nw.save_weights(d, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(WeightArchiveError, match="truncated"):
            nw.load_weights(d, path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.ecwt"
        path.write_bytes(b"NOPE" + bytes(8))
        with pytest.raises(WeightArchiveError, match="magic"):
            nw.load_weights(nw.build_discriminator("edge"), path)


def test_feature_extractor_deterministic(rng):
    a = nw.build_feature_extractor()
    b = nw.build_feature_extractor()
    x = rng.random((2, 3, 16, 16))
    np.testing.assert_array_equal(nw.forward(a, x)[0], nw.forward(b, x)[0])

import numpy as np
import pytest

from mfstack import autodiff as ad
from mfstack import networks as nets


class TestDenseNetwork:
    def test_init_deterministic(self):
        a = nets.DenseNetwork([1, 5, 1], "tanh", seed=3)
        b = nets.DenseNetwork([1, 5, 1], "tanh", seed=3)
        assert np.array_equal(a.flat_params(), b.flat_params())

    def test_param_count_3x32(self):
        net = nets.DenseNetwork([1, 32, 32, 32, 1], "swish", seed=0)
        assert net.param_count == 2209

    def test_param_count_pure_linear(self):
        net = nets.DenseNetwork([1, 1], "none", seed=0)
        assert net.param_count == 2

    def test_invalid_shape_rejected(self):
        with pytest.raises(nets.NetworkError):
            nets.DenseNetwork([1], "tanh")
        with pytest.raises(nets.NetworkError):
            nets.DenseNetwork([1, 0, 1], "tanh")
        with pytest.raises(nets.NetworkError):
            nets.DenseNetwork([1, 5, 1], "relu6")

    def test_zero_params_zero_output(self):
        net = nets.DenseNetwork([2, 7, 3], "tanh", seed=0, init=False)
        out = net.forward(np.random.default_rng(0).normal(size=(4, 2)))
        assert np.all(out == 0.0)

    def test_hand_evaluated_single_layer(self):
        net = nets.DenseNetwork([1, 1], "tanh", seed=0)
        net.params[0][:] = [[2.0]]
        net.params[1][:] = [1.0]
        # single layer is the output layer: affine only, so apply tanh around it
        out = ad.tanh(ad.Var(net.forward(np.array([[0.0]]))))
        assert ad.evaluate(out) == pytest.approx(np.tanh(1.0), abs=1e-15)
        assert ad.evaluate(out) == pytest.approx(0.76159, abs=1e-5)

    @pytest.mark.parametrize("sizes", [[2, 20, 2], [1, 5, 1], [1, 1], [3, 8, 8, 2]])
    def test_affine_when_activation_none(self, sizes):
        net = nets.DenseNetwork(sizes, "none", seed=1)
        rng = np.random.default_rng(2)
        u = rng.normal(size=(1, sizes[0]))
        d = rng.normal(size=(1, sizes[0]))
        h = 0.37
        f0 = net.forward(u)
        f1 = net.forward(u + h * d)
        f2 = net.forward(u + 2 * h * d)
        assert np.max(np.abs(f2 - 2 * f1 + f0)) < 1e-12

    def test_dimension_mismatch_message(self):
        net = nets.DenseNetwork([2, 4, 1], "tanh", seed=0)
        with pytest.raises(nets.NetworkError, match="width 3.*expected 2"):
            net.forward(np.zeros((5, 3)))

    def test_flat_roundtrip(self):
        net = nets.DenseNetwork([2, 6, 2], "swish", seed=5)
        vec = net.flat_params()
        other = nets.DenseNetwork([2, 6, 2], "swish", seed=9)
        other.load_flat_params(vec)
        assert np.array_equal(other.flat_params(), vec)
        with pytest.raises(nets.NetworkError):
            other.load_flat_params(vec[:-1])


class TestModifiedDeepONet:
    def test_zero_branch_params_zero_output(self):
        net = nets.ModifiedDeepONet([4, 8, 8, 3], [2, 8, 8, 3], "tanh", seed=0)
        # zero every branch tower parameter: branch output is 0 so G = 0
        for i in range(net._branch_slice.start, net._branch_slice.stop):
            net.params[i] = np.zeros_like(net.params[i])
        u = np.random.default_rng(0).normal(size=(5, 4))
        x = np.random.default_rng(1).normal(size=(5, 2))
        assert np.allclose(net.forward(u, x), 0.0, atol=1e-300)

    def test_hand_set_dot_product(self):
        # p=1, single-layer towers: branch 3, trunk 2 -> G = 6
        net = nets.ModifiedDeepONet([1, 1], [1, 1], "none", seed=0)
        net.params[0][:] = 0.0
        net.params[1][:] = 3.0   # branch bias
        net.params[2][:] = 0.0
        net.params[3][:] = 2.0   # trunk bias
        out = net.forward(np.zeros((1, 1)), np.zeros((1, 1)))
        assert out[0] == pytest.approx(6.0, abs=1e-15)

    def test_sensor_count_mismatch(self):
        net = nets.ModifiedDeepONet([7, 5, 5, 4], [2, 5, 5, 4], "tanh", seed=0)
        with pytest.raises(nets.NetworkError, match="sensor count"):
            net.forward(np.zeros((3, 6)), np.zeros((3, 2)))

    def test_latent_width_mismatch_rejected(self):
        with pytest.raises(nets.NetworkError, match="latent"):
            nets.ModifiedDeepONet([4, 8, 3], [2, 8, 5], "tanh")

    def test_sensor_permutation_symmetry(self):
        net = nets.ModifiedDeepONet([6, 9, 9, 4], [2, 9, 9, 4], "tanh", seed=4)
        rng = np.random.default_rng(8)
        u = rng.normal(size=(3, 6))
        x = rng.normal(size=(3, 2))
        base = net.forward(u, x)
        perm = rng.permutation(6)
        net.params[0] = net.params[0][perm]                     # first branch layer
        eu = net._encoder_slice.start
        net.params[eu] = net.params[eu][perm]                   # branch encoder
        permuted = net.forward(u[:, perm], x)
        assert np.allclose(base, permuted, atol=1e-12)

    def test_linear_in_final_branch_weights(self):
        # superposition over the last branch layer, all else fixed
        net = nets.ModifiedDeepONet([5, 8, 8, 8, 4], [2, 8, 8, 8, 4], "tanh", seed=2)
        rng = np.random.default_rng(3)
        u = rng.normal(size=(4, 5))
        x = rng.normal(size=(4, 2))
        iW = net._branch_slice.stop - 2
        ib = net._branch_slice.stop - 1
        Wa = rng.normal(size=net.params[iW].shape)
        Wb = rng.normal(size=net.params[iW].shape)
        saved_b = net.params[ib].copy()

        def run(W, b):
            net.params[iW] = W
            net.params[ib] = b
            return net.forward(u, x)

        fa = run(Wa, saved_b)
        fb = run(Wb, np.zeros_like(saved_b))
        fab = run(2.0 * Wa + 3.0 * Wb, 2.0 * saved_b)
        assert np.allclose(fab, 2.0 * fa + 3.0 * fb, atol=1e-10)

    def test_forward_accepts_jets(self):
        net = nets.ModifiedDeepONet([3, 6, 6, 4], [2, 6, 6, 4], "tanh", seed=0)
        rng = np.random.default_rng(0)
        u = rng.normal(size=(4, 3))
        xv = rng.normal(size=(4, 1))
        tv = rng.normal(size=(4, 1))
        xj = ad.Jet.seed(xv, "x", order=2)
        coords = ad.concat([xj, ad.Jet(tv)], axis=1)
        out = net.forward(ad.Jet(u), coords)
        h = 1e-4

        def fwd(xq):
            return net.forward(u, np.concatenate([xq, tv], axis=1))

        fd2 = (fwd(xv + h) - 2 * fwd(xv) + fwd(xv - h)) / h ** 2
        assert np.max(np.abs(ad.value_of(out.second("x")) - fd2)) < 1e-5


class TestCheckpoints:
    def test_roundtrip_bit_identical(self, tmp_path):
        net = nets.DenseNetwork([2, 11, 3], "swish", seed=6)
        path = tmp_path / "net.ckpt"
        nets.save_checkpoint(path, net)
        loaded, alpha = nets.network_from_checkpoint(str(path))
        assert alpha is None
        assert np.array_equal(loaded.flat_params(), net.flat_params())
        rng = np.random.default_rng(1)
        x = rng.normal(size=(100, 2))
        assert np.array_equal(loaded.forward(x), net.forward(x))

    def test_alpha_roundtrip(self, tmp_path):
        net = nets.DenseNetwork([1, 4, 1], "tanh", seed=0)
        path = tmp_path / "lvl.ckpt"
        nets.save_checkpoint(path, net, alpha=0.12)
        _, alpha = nets.network_from_checkpoint(str(path))
        assert alpha == 0.12

    def test_deeponet_roundtrip(self, tmp_path):
        net = nets.ModifiedDeepONet([5, 7, 7, 3], [2, 7, 7, 3], "tanh", seed=1)
        path = tmp_path / "don.ckpt"
        nets.save_checkpoint(path, net, alpha=-0.3)
        loaded, alpha = nets.network_from_checkpoint(str(path))
        assert alpha == -0.3
        assert np.array_equal(loaded.flat_params(), net.flat_params())

    def test_transfer_shape_mismatch_rejected(self, tmp_path):
        src = nets.DenseNetwork([1, 5, 1], "tanh", seed=0)
        path = tmp_path / "src.ckpt"
        nets.save_checkpoint(path, src)
        dst = nets.DenseNetwork([1, 6, 1], "tanh", seed=0)
        with pytest.raises(nets.NetworkError, match="layer_sizes"):
            nets.transfer_parameters(str(path), dst)

    def test_transfer_copies_alpha_and_params(self, tmp_path):
        src = nets.DenseNetwork([2, 5, 2], "swish", seed=7)
        path = tmp_path / "src.ckpt"
        nets.save_checkpoint(path, src, alpha=0.12)
        dst = nets.DenseNetwork([2, 5, 2], "swish", seed=8)
        alpha = nets.transfer_parameters(str(path), dst)
        assert alpha == 0.12
        assert np.array_equal(dst.flat_params(), src.flat_params())

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            nets.load_checkpoint("/nonexistent/never.ckpt")

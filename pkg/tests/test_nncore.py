import numpy as np
import pytest

from shellkoop import nncore
from shellkoop.nncore import (
    AdamState,
    Parameter,
    adam_step,
    available_backends,
    finite_difference_check,
    xavier_uniform,
)

BACKENDS = list(available_backends().items())


@pytest.fixture(params=BACKENDS, ids=[name for name, _ in BACKENDS])
def ops(request):
    return request.param[1]


def fd_grad(loss, array, h=1e-6):
    """Central-difference gradient of a scalar loss over every entry."""
    g = np.zeros_like(array)
    flat = array.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss()
        flat[i] = orig - h
        down = loss()
        flat[i] = orig
        gf[i] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


class TestMatmul:
    def test_identity(self, ops):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 4))
        assert np.allclose(ops.matmul(a, np.eye(4)), a)

    def test_scalar_grad(self, ops):
        a = np.array([[2.0]])
        b = np.array([[5.0]])
        da, db = ops.matmul_backward(np.array([[1.0]]), a, b)
        assert da[0, 0] == 5.0
        assert db[0, 0] == 2.0

    def test_against_triple_loop(self, ops):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 2))
        want = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                for k in range(4):
                    want[i, j] += a[i, k] * b[k, j]
        assert np.allclose(ops.matmul(a, b), want, atol=1e-12)

    def test_shape_mismatch(self, ops):
        with pytest.raises(ValueError):
            ops.matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_backward_fd(self, ops):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(4, 3))
        b = rng.normal(size=(3, 5))
        g = rng.normal(size=(4, 5))
        da, db = ops.matmul_backward(g, a, b)
        da_fd = fd_grad(lambda: float((ops.matmul(a, b) * g).sum()), a)
        db_fd = fd_grad(lambda: float((ops.matmul(a, b) * g).sum()), b)
        assert rel_err(da, da_fd).max() < 1e-7
        assert rel_err(db, db_fd).max() < 1e-7


class TestAffine:
    @pytest.mark.parametrize("activate", [False, True])
    def test_backward_fd(self, ops, activate):
        rng = np.random.default_rng(3)
        h = rng.normal(size=(5, 4))
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=(1, 3))
        g = rng.normal(size=(5, 3))

        def loss():
            return float((ops.affine_forward(h, w, b, activate) * g).sum())

        out = ops.affine_forward(h, w, b, activate)
        dh, dw, db = ops.affine_backward(g, h, w, out, activate)
        assert rel_err(dh, fd_grad(loss, h)).max() < 1e-6
        assert rel_err(dw, fd_grad(loss, w)).max() < 1e-6
        assert rel_err(db, fd_grad(loss, b)).max() < 1e-6

    def test_linear_identity(self, ops):
        h = np.random.default_rng(4).normal(size=(6, 6))
        out = ops.affine_forward(h, np.eye(6), np.zeros((1, 6)), False)
        assert np.allclose(out, h)

    def test_tanh_bounded(self, ops):
        rng = np.random.default_rng(5)
        out = ops.affine_forward(
            rng.normal(size=(8, 3)), rng.normal(size=(3, 3)), np.zeros((1, 3)), True
        )
        assert (np.abs(out) < 1.0).all()
        # saturation never exceeds the closure of the range
        big = ops.affine_forward(
            rng.normal(size=(4, 2)) * 50, rng.normal(size=(2, 2)) * 50, np.zeros((1, 2)), True
        )
        assert (np.abs(big) <= 1.0).all()


class TestGcnLayer:
    def test_identity_adjacency_is_dense(self, ops):
        rng = np.random.default_rng(6)
        h = rng.normal(size=(5, 4))
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=(1, 3))
        out, ah = ops.gcn_forward(np.eye(5), h, w, b, True)
        assert np.allclose(ah, h)
        assert np.allclose(out, np.tanh(h @ w + b))

    def test_permutation_equivariance(self, ops):
        rng = np.random.default_rng(7)
        n = 6
        a = rng.uniform(size=(n, n))
        a = (a + a.T) / 2
        h = rng.normal(size=(n, 4))
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=(1, 3))
        perm = rng.permutation(n)
        p = np.eye(n)[perm]
        out, _ = ops.gcn_forward(a, h, w, b, True)
        out_p, _ = ops.gcn_forward(p @ a @ p.T, p @ h, w, b, True)
        assert np.allclose(out_p, p @ out, atol=1e-12)

    @pytest.mark.parametrize("activate", [False, True])
    def test_backward_fd(self, ops, activate):
        rng = np.random.default_rng(8)
        n = 5
        a = rng.uniform(size=(n, n))
        a = (a + a.T) / 2
        h = rng.normal(size=(n, 4))
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=(1, 3))
        g = rng.normal(size=(n, 3))

        def loss():
            return float((ops.gcn_forward(a, h, w, b, activate)[0] * g).sum())

        out, ah = ops.gcn_forward(a, h, w, b, activate)
        dh, dw, db = ops.gcn_backward(g, a, ah, w, out, activate)
        assert rel_err(dh, fd_grad(loss, h)).max() < 1e-6
        assert rel_err(dw, fd_grad(loss, w)).max() < 1e-6
        assert rel_err(db, fd_grad(loss, b)).max() < 1e-6


class TestMeanPool:
    def test_identical_rows(self, ops):
        row = np.array([[1.0, -2.0, 3.0]])
        h = np.repeat(row, 7, axis=0)
        assert np.allclose(ops.mean_pool_forward(h), row)

    def test_permutation_invariant(self, ops):
        rng = np.random.default_rng(9)
        h = rng.normal(size=(10, 4))
        perm = rng.permutation(10)
        assert np.allclose(ops.mean_pool_forward(h), ops.mean_pool_forward(h[perm]))

    def test_backward_fd(self, ops):
        rng = np.random.default_rng(10)
        h = rng.normal(size=(6, 3))
        g = rng.normal(size=(1, 3))
        dh = ops.mean_pool_backward(g, 6)
        dh_fd = fd_grad(lambda: float((ops.mean_pool_forward(h) * g).sum()), h)
        assert rel_err(dh, dh_fd).max() < 1e-7


class TestMse:
    def test_zero_on_equal(self, ops):
        x = np.random.default_rng(11).normal(size=(4, 3))
        mse, sse, n = ops.mse_forward(x, x.copy())
        assert mse == 0.0 and sse == 0.0 and n == 12

    def test_scalar_case(self, ops):
        mse, sse, _ = ops.mse_forward(np.array([[3.0]]), np.array([[1.0]]))
        assert mse == 4.0 and sse == 4.0

    def test_row_mask_restricts(self, ops):
        pred = np.array([[1.0, 1.0], [5.0, 5.0], [2.0, 2.0]])
        target = np.zeros((3, 2))
        mask = np.array([False, True, False])
        mse, sse, n = ops.mse_forward(pred, target, mask)
        assert sse == 50.0 and mse == 25.0 and n == 2
        g = ops.mse_backward(pred, target, mask)
        assert (g[0] == 0).all() and (g[2] == 0).all()
        assert np.allclose(g[1], 2 * 5.0 / 2)

    def test_empty_mask_rejected(self, ops):
        with pytest.raises(ValueError):
            ops.mse_forward(np.zeros((2, 2)), np.zeros((2, 2)), np.array([False, False]))

    def test_backward_fd(self, ops):
        rng = np.random.default_rng(12)
        pred = rng.normal(size=(5, 3))
        target = rng.normal(size=(5, 3))
        mask = np.array([True, False, True, True, False])
        g = ops.mse_backward(pred, target, mask)
        g_fd = fd_grad(lambda: ops.mse_forward(pred, target, mask)[0], pred)
        assert rel_err(g, g_fd).max() < 1e-7


class TestAdam:
    def test_zero_grad_no_move(self):
        p = Parameter("w", np.ones((2, 2)))
        state = AdamState(lr=0.1)
        adam_step([p], state)
        assert np.array_equal(p.value, np.ones((2, 2)))

    def test_first_step_magnitude(self):
        p = Parameter("w", np.zeros((1, 1)))
        p.grad[:] = 1.0
        state = AdamState(lr=0.05)
        adam_step([p], state)
        # bias-corrected first step moves by ~lr
        assert p.value[0, 0] == pytest.approx(-0.05, rel=1e-6)
        assert p.grad[0, 0] == 0.0  # grads cleared afterward

    def test_quadratic_bowl_converges(self):
        p = Parameter("w", np.array([[1.0]]))
        state = AdamState(lr=0.05)
        for _ in range(500):
            p.grad[:] = 2.0 * p.value
            adam_step([p], state)
        assert abs(p.value[0, 0]) < 1e-3


class TestFiniteDifferenceCheck:
    def test_linear_loss_exact(self):
        p = Parameter("w", np.random.default_rng(13).normal(size=(3, 4)))
        p.grad[:] = 1.0
        err = finite_difference_check(lambda: float(p.value.sum()), [p])
        assert err < 1e-9

    def test_detects_corruption(self):
        p = Parameter("w", np.random.default_rng(14).normal(size=(3, 4)))
        p.grad[:] = 1.0 + 0.5  # deliberately wrong for L = sum(w)
        err = finite_difference_check(lambda: float(p.value.sum()), [p])
        assert err > 1e-2


class TestXavier:
    def test_bound_and_determinism(self):
        w1 = xavier_uniform(20, 30, np.random.default_rng(15))
        w2 = xavier_uniform(20, 30, np.random.default_rng(15))
        assert np.array_equal(w1, w2)
        bound = np.sqrt(6.0 / 50.0)
        assert np.abs(w1).max() <= bound


class TestCrossBackend:
    @pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
    def test_backends_agree(self):
        mods = dict(BACKENDS)
        py, cc = mods["python"], mods["compiled"]
        rng = np.random.default_rng(16)
        for _ in range(10):
            n, d, k = rng.integers(1, 9, size=3)
            a = rng.uniform(size=(n, n))
            a = (a + a.T) / 2
            h = rng.normal(size=(n, d))
            w = rng.normal(size=(d, k))
            b = rng.normal(size=(1, k))
            g = rng.normal(size=(n, k))
            for activate in (False, True):
                o1, ah1 = py.gcn_forward(a, h, w, b, activate)
                o2, ah2 = cc.gcn_forward(a, h, w, b, activate)
                assert np.allclose(o1, o2, atol=1e-13)
                assert np.allclose(ah1, ah2, atol=1e-13)
                g1 = py.gcn_backward(g, a, ah1, w, o1, activate)
                g2 = cc.gcn_backward(g, a, ah2, w, o2, activate)
                for x1, x2 in zip(g1, g2):
                    assert np.allclose(x1, x2, atol=1e-12)
                a1 = py.affine_forward(h, w, b, activate)
                a2 = cc.affine_forward(h, w, b, activate)
                assert np.allclose(a1, a2, atol=1e-13)

import numpy as np
import pytest

from cone_attention.geometry import HalfSpacePoint
from cone_attention.gradients import (
    SMOOTH_GAP,
    cone_logit_grad,
    euclidean_pair_grads,
    finite_diff_check,
    gradient_check,
    logit_grad,
    pair_logit_grads,
    projection_jacobian,
)
from cone_attention.kernels import KernelConfig, cone_logit
from cone_attention.projections import project_array

PAIRINGS = [
    ("penumbral", "xi"),
    ("penumbral", "exp_origin"),
    ("umbral", "psi"),
    ("umbral", "xi"),
    ("umbral", "exp_origin"),
    ("dist_halfspace", "xi"),
    ("dist_halfspace", "psi"),
    ("dist_halfspace", "exp_origin"),
    ("dist_hyperboloid", "pseudopolar"),
    ("laplacian", "none"),
    ("dot", "none"),
]


def P(*coords):
    return HalfSpacePoint.from_coords(coords)


class TestFiniteDiff:
    def test_linear(self, rng):
        # Dyadic data and step keep every operation exact.
        a = rng.integers(-8, 8, size=5).astype(float)
        x = rng.integers(-64, 64, size=5) / 8.0
        assert finite_diff_check(lambda z: a @ z + 3.0, x, a, step=2.0**-20) <= 1e-10

    def test_linear_rounding_floor(self, rng):
        # In general the error is set by rounding f: about eps * |f| / step.
        for _ in range(100):
            a, x = rng.normal(size=5), rng.normal(size=5)
            assert finite_diff_check(lambda z: a @ z, x, a) <= 1e-9

    def test_quadratic(self, rng):
        A = rng.normal(size=(4, 4))
        A = A + A.T
        x0 = rng.normal(size=4)
        assert finite_diff_check(lambda x: 0.5 * x @ A @ x, x0, A @ x0, step=1e-6) <= 1e-8

    def test_detects_wrong_gradient(self):
        assert finite_diff_check(lambda x: x @ x, [1.0, 2.0], [2.0, 0.0]) > 0.5

    def test_callable_gradient(self):
        assert finite_diff_check(np.sum, np.ones(3), lambda x: np.ones_like(x), step=2.0**-20) <= 1e-10

    def test_propagates_errors(self):
        def boom(x):
            raise RuntimeError("nope")

        with pytest.raises(RuntimeError):
            finite_diff_check(boom, [1.0], [0.0])


class TestConeGrad:
    def test_umbral_tie(self):
        u = P(0.3, 0.5)
        g = cone_logit_grad(u, u, KernelConfig(kind="umbral", gamma=1.5))
        assert g.nonsmooth
        np.testing.assert_array_equal(g.grad_u, [0.0, -1.5])
        np.testing.assert_array_equal(g.grad_v, [0.0, 0.0])

    @pytest.mark.parametrize("kind", ["umbral", "penumbral"])
    def test_middle_branch(self, kind, rng):
        cfg = KernelConfig(kind=kind, gamma=0.8)
        checked = 0
        while checked < 20:
            u, v = P(*rng.uniform(-0.3, 0.3, 2), rng.uniform(0.1, 0.9)), P(*rng.uniform(-0.3, 0.3, 2), rng.uniform(0.1, 0.9))
            g = cone_logit_grad(u, v, cfg)
            gap = pair_logit_grads(u.coords[None], v.coords[None], cfg)[3][0]
            if gap < SMOOTH_GAP or g.value == -0.8 * max(u.height, v.height):
                continue
            z = np.concatenate([u.coords, v.coords])
            err = finite_diff_check(
                lambda z: cone_logit(HalfSpacePoint.from_coords(z[:3]), HalfSpacePoint.from_coords(z[3:]), cfg),
                z,
                np.concatenate([g.grad_u, g.grad_v]),
            )
            assert err <= 1e-5
            checked += 1

    def test_value_matches_kernel(self, rng):
        for kind in ("umbral", "penumbral"):
            cfg = KernelConfig(kind=kind)
            for _ in range(200):
                u, v = P(*rng.uniform(-1, 1, 2), rng.uniform(0.05, 0.95)), P(*rng.uniform(-1, 1, 2), rng.uniform(0.05, 0.95))
                assert cone_logit_grad(u, v, cfg).value == pytest.approx(cone_logit(u, v, cfg), rel=1e-14)

    def test_type_checks(self):
        with pytest.raises(TypeError):
            logit_grad(np.zeros(2), np.zeros(2), KernelConfig())
        with pytest.raises(ValueError):
            cone_logit_grad(P(0.0, 0.5), P(0.1, 0.5), KernelConfig(kind="dot"))


class TestProjectionJacobian:
    def test_psi_at_origin(self):
        np.testing.assert_array_equal(projection_jacobian(np.zeros(3), "psi"), np.eye(3))

    def test_xi_at_zero(self):
        J = projection_jacobian(np.zeros(2), "xi", 1.0)
        assert J[-1, -1] == 0.25

    @pytest.mark.parametrize("kind", ["psi", "xi", "exp_origin", "pseudopolar"])
    def test_finite_differences(self, kind, rng):
        for _ in range(20):
            x = 0.8 * rng.normal(size=4)
            J = projection_jacobian(x, kind, 1.3)
            for row in range(J.shape[0]):
                err = finite_diff_check(lambda z: project_array(z[None], kind, 1.3)[0, row], x, J[row])
                assert err <= 1e-5


@pytest.mark.parametrize("kind, projection", PAIRINGS)
def test_pairing_finite_differences(kind, projection):
    cfg = KernelConfig(kind=kind, projection=projection, gamma=1.3, beta=0.7, c=0.1)
    assert gradient_check(cfg, samples=100, seed=7) <= 1e-5


@pytest.mark.parametrize("kind, projection", PAIRINGS)
def test_gradient_role_swap(kind, projection, rng):
    cfg = KernelConfig(kind=kind, projection=projection)
    X, Y = rng.normal(size=(50, 3)), rng.normal(size=(50, 3))
    _, gX, gY, gap = euclidean_pair_grads(X, Y, cfg)
    _, gY2, gX2, _ = euclidean_pair_grads(Y, X, cfg)
    smooth = gap >= SMOOTH_GAP
    np.testing.assert_allclose(gX[smooth], gX2[smooth], atol=1e-12)
    np.testing.assert_allclose(gY[smooth], gY2[smooth], atol=1e-12)


def test_laplacian_gradient_norm(rng):
    cfg = KernelConfig(kind="laplacian", gamma=2.5)
    X, Y = rng.normal(size=(100, 5)), rng.normal(size=(100, 5))
    _, gX, gY, _ = pair_logit_grads(X, Y, cfg)
    np.testing.assert_allclose(np.linalg.norm(gX, axis=1), 2.5, rtol=1e-15)
    np.testing.assert_allclose(gX, -gY, rtol=0, atol=0)

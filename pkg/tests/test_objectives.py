import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ostoc.objectives import (CallablePiece, CappedPiece, LinearPiece, LinearReward, LogPiece,
                              QuadraticConcave, SeparableConcave, SquaredDistancePenalty,
                              UnsupportedVariant, ZeroObjective, conjugate_neg_f,
                              conjugate_neg_f_argmax, eval_objective, golden_section_max,
                              gradient_range_box, objective_from_dict)
from ostoc.vectorspace import NormKind, dual_ball_grid_max


def random_objective(rng, d, family):
    if family == "log":
        return SeparableConcave([LogPiece(rng.uniform(0.2, 1), rng.uniform(0.5, 4)) for _ in range(d)])
    if family == "capped":
        return SeparableConcave([CappedPiece(rng.uniform(0.5, 2), rng.uniform(0.1, 0.8)) for _ in range(d)])
    if family == "linear":
        return SeparableConcave([LinearPiece(rng.uniform(-1, 1)) for _ in range(d)])
    return QuadraticConcave(rng.uniform(-1, 1, d), rng.uniform(0, 1, d), rng.uniform(0.2, 3))


FAMILIES = ["log", "capped", "linear", "quadratic"]


def test_eval_examples():
    assert eval_objective(ZeroObjective(3), [0.1, 0.5, 0.9]) == 0.0
    assert QuadraticConcave([0, 0], [0, 0], 2.0).value([1, 0]) == pytest.approx(-1.0)
    f = SeparableConcave([CappedPiece(1.0, 0.5), CappedPiece(1.0, 0.5)])
    assert f.value([0.8, 0.3]) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        f.value([1.2, 0.3])


def test_conjugate_examples():
    phi = np.array([0.4, -0.3, 0.0])
    assert conjugate_neg_f(ZeroObjective(3), phi) == pytest.approx(0.4)
    c = np.array([0.2, 0.1, -0.5])
    f = SeparableConcave([LinearPiece(x) for x in c])
    assert conjugate_neg_f(f, phi) == pytest.approx(np.sum(np.maximum(phi + c, 0)))
    q = QuadraticConcave([0.0], [0.5], 1.0)
    assert conjugate_neg_f(q, [0.0]) == pytest.approx(0.0)
    assert conjugate_neg_f_argmax(q, [0.0]) == pytest.approx([0.5])


def test_argmax_examples():
    assert np.array_equal(conjugate_neg_f_argmax(ZeroObjective(2), [1, -1]), [1, 0])
    assert np.array_equal(conjugate_neg_f_argmax(ZeroObjective(2), [0, 0]), [0, 0])
    q = QuadraticConcave([0.0], [0.5], 1.0)
    assert conjugate_neg_f_argmax(q, [0.2]) == pytest.approx([0.7])
    grid = np.linspace(0, 1, 100001)
    assert grid[np.argmax(0.2 * grid + q.value(grid[:, None]))] == pytest.approx(0.7, abs=1e-5)


def test_argmax_tie_break_is_smallest():
    # flat piece on [0.5, 1] under phi = 0: every x >= 0.5 is optimal
    f = SeparableConcave([CappedPiece(1.0, 0.5)])
    assert conjugate_neg_f_argmax(f, [0.0]) == pytest.approx([0.5])
    g = SeparableConcave([LinearPiece(0.3)])
    assert conjugate_neg_f_argmax(g, [-0.3]) == pytest.approx([0.0])


def test_gradient_range_examples():
    lo, hi = gradient_range_box(QuadraticConcave([0.0], [0.0], 1.0))
    assert lo == pytest.approx([-1.0]) and hi == pytest.approx([0.0])
    q = QuadraticConcave([0.3, -0.2], [0.4, 0.9], 2.0)
    lo, hi = q.gradient_range_box()
    assert np.allclose(lo, q.a - q.beta * (1 - q.x0)) and np.allclose(hi, q.a + q.beta * q.x0)
    with pytest.raises(UnsupportedVariant):
        SeparableConcave([CappedPiece(1.0, 0.5)]).gradient_range_box()


def test_separable_gradient_range_matches_sampling():
    f = SeparableConcave([LogPiece(0.7, 3.0), LinearPiece(-0.4)])
    xs = np.linspace(0, 1, 1000)
    G = f.gradient(np.stack([xs, xs], axis=1))
    lo, hi = f.gradient_range_box()
    assert np.allclose(lo, G.min(axis=0)) and np.allclose(hi, G.max(axis=0))


@pytest.mark.parametrize("family", FAMILIES)
def test_fenchel_young_and_argmax_consistency(family, rng):
    for _ in range(20):
        d = int(rng.integers(1, 4))
        f = random_objective(rng, d, family)
        phi = rng.normal(scale=2, size=d)
        x = rng.uniform(0, 1, d)
        conj = f.conjugate(phi)
        assert phi @ x + f.value(x) <= conj + 1e-9
        xs = f.conjugate_argmax(phi)
        assert np.all((xs >= 0) & (xs <= 1))
        assert conj == pytest.approx(phi @ xs + f.value(xs), abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_conjugate_matches_grid(family, rng):
    for _ in range(5):
        f = random_objective(rng, 1, family)
        phi = rng.normal(size=1)
        grid = np.linspace(0, 1, 200001)[:, None]
        brute = np.max(grid[:, 0] * phi[0] + f.value(grid))
        # grid spacing 5e-6 times slopes below 4 bounds the discretisation gap
        assert brute - 1e-12 <= f.conjugate(phi) <= brute + 2e-5


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("kind", [NormKind.EUCLIDEAN, NormKind.MAX_ABS])
def test_duality_recovery(family, kind, rng):
    # f(x) = min over the dual ball of radius L of (-f)*(phi) - phi . x
    for _ in range(3):
        f = random_objective(rng, 2, family)
        x = rng.uniform(0, 1, 2)
        L = f.lipschitz(kind)

        def obj(P):
            return np.array([p @ x - f.conjugate(p) for p in P])

        _, val = dual_ball_grid_max(obj, 2, kind, L, resolution=21, refine_rounds=25)
        assert -val == pytest.approx(f.value(x), abs=1e-3)


def test_strong_convexity_of_quadratic_conjugate(rng):
    # (-f)* is (1/beta)-strongly convex on the gradient range (there the maximizer is interior)
    for _ in range(50):
        d = int(rng.integers(1, 4))
        q = QuadraticConcave(rng.uniform(-1, 1, d), rng.uniform(0, 1, d), rng.uniform(0.3, 3))
        lo, hi = q.gradient_range_box()
        t, p = rng.uniform(-hi, -lo, (2, d))  # phi = -grad f ranges over [-hi, -lo]
        g_p = q.conjugate_argmax(p)
        lhs = q.conjugate(t)
        rhs = q.conjugate(p) + g_p @ (t - p) + 0.5 / q.beta * np.sum((t - p) ** 2)
        assert lhs >= rhs - 1e-6


@given(st.sampled_from(FAMILIES), st.integers(1, 4), st.integers(0, 2**31))
def test_lipschitz_bounds_supergradients(family, d, seed):
    r = np.random.default_rng(seed)
    f = random_objective(r, d, family)
    x, y = r.uniform(0, 1, (2, d))
    # L is a dual-norm bound, so |f(x) - f(y)| <= L * ||x - y|| in the primal norm
    for kind, primal in ((NormKind.EUCLIDEAN, np.linalg.norm(x - y)),
                         (NormKind.MAX_ABS, np.max(np.abs(x - y)))):
        assert abs(f.value(x) - f.value(y)) <= f.lipschitz(kind) * primal + 1e-9


def test_smoothness_and_variants():
    assert QuadraticConcave([0.0], [0.0], 2.5).smoothness_beta == 2.5
    assert SeparableConcave([CappedPiece(1.0, 0.5)]).smoothness_beta is None
    assert SeparableConcave([LogPiece(1.0, 2.0)]).smoothness_beta == pytest.approx(4.0)
    assert LinearReward(2).uses_rewards and not ZeroObjective(2).uses_rewards
    with pytest.raises(ValueError):
        QuadraticConcave([0.0], [0.0], 0.0)
    with pytest.raises(UnsupportedVariant):
        ZeroObjective(1).gradient([0.5])


def test_callable_piece_golden_section():
    piece = CallablePiece(lambda t: -(t - 0.3) ** 2, lipschitz=1.4, deriv=lambda t: -2 * (t - 0.3))
    f = SeparableConcave([piece])
    assert f.conjugate_argmax([0.2])[0] == pytest.approx(0.4, abs=1e-7)
    assert golden_section_max(lambda t: -abs(t - 0.25)) == pytest.approx(0.25, abs=1e-8)
    with pytest.raises(ValueError):
        piece.to_dict()


@pytest.mark.parametrize("family", FAMILIES)
def test_dict_roundtrip(family, rng):
    f = random_objective(rng, 3, family)
    g = objective_from_dict(f.to_dict())
    x = rng.uniform(0, 1, 3)
    assert g.value(x) == f.value(x) and g.to_dict() == f.to_dict()
    for z in (ZeroObjective(2), LinearReward(2)):
        assert objective_from_dict(z.to_dict()).to_dict() == z.to_dict()


def test_squared_distance_penalty(rng):
    h = SquaredDistancePenalty([0.0, 0.2], [0.5, 0.6])
    assert h.value([0.7, 0.1]) == pytest.approx(0.04 + 0.01)
    assert np.allclose(h.gradient([0.7, 0.1]), [0.4, -0.2])
    lo, hi = h.gradient_range_box()
    assert np.allclose(lo, [0.0, -0.4]) and np.allclose(hi, [1.0, 0.8])
    grid = np.linspace(0, 1, 1001)
    Y = np.stack(np.meshgrid(grid, grid), -1).reshape(-1, 2)
    hv = np.sum((np.maximum(Y - h.upper, 0) + np.maximum(h.lower - Y, 0)) ** 2, axis=1)
    for _ in range(5):
        theta = rng.uniform(lo, hi)
        assert h.conjugate(theta) == pytest.approx(np.max(Y @ theta - hv), abs=1e-5)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ostoc import algorithms as A
from ostoc import instances as I
from ostoc.algorithms import RunConfig
from ostoc.convex_sets import budget_cap, distance
from ostoc.instances import Instance, Request
from ostoc.objectives import (CappedPiece, LinearReward, QuadraticConcave, SeparableConcave,
                              UnsupportedVariant, ZeroObjective)
from ostoc.offline_oracles import brute_force_opt, fractional_opt


def zero_general(inst):
    return Instance(inst.d, inst.T, "general", inst.set_spec, ZeroObjective(inst.d), inst.requests,
                    witness=inst.witness)


def test_select_feasibility_examples(rng):
    V = np.array([[0.2], [0.9]])
    assert A.select_feasibility(V, np.zeros(1)) == 0
    assert A.select_feasibility(V, np.ones(1)) == 0
    assert A.select_feasibility(V[::-1], np.ones(1)) == 1
    for _ in range(50):
        V, theta = rng.uniform(0, 1, (5, 2)), rng.normal(size=2)
        scores = [v @ theta for v in V]
        assert A.select_feasibility(V, theta) == min(range(5), key=lambda i: (scores[i], i))


@given(st.integers(1, 6), st.integers(1, 4), st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_selection_scale_invariance(k, d, lam, seed):
    r = np.random.default_rng(seed)
    V, R = r.uniform(0, 1, (k, d)), r.uniform(0, 1, k)
    theta, phi = r.normal(size=d), r.normal(size=d)
    Z, L = float(r.uniform(0, 3)), float(r.uniform(0, 2))
    assert A.select_feasibility(V, lam * theta) == A.select_feasibility(V, theta)
    assert A.select_general(V, lam * theta, lam * phi, Z, L) == A.select_general(V, theta, phi, Z, L)
    assert A.select_linear(V, lam * R, lam * theta, Z) == A.select_linear(V, R, theta, Z)


def test_feasibility_hand_trace():
    inst = Instance(1, 1, "feasibility", budget_cap([0.5]), ZeroObjective(1),
                    (Request([[0.0], [1.0]]),), witness=(0,))
    tr = A.run_feasibility(inst, RunConfig("feasibility"))
    assert list(tr.idx) == [0] and distance(tr.vbar, inst.set_spec) == 0.0


def test_feasibility_singletons_are_forced():
    reqs = tuple(Request([[x, 1 - x]]) for x in (0.1, 0.7, 0.4))
    inst = Instance(2, 3, "feasibility", budget_cap([0.3, 0.3]), ZeroObjective(2), reqs)
    tr = A.run(inst, RunConfig("feasibility", seed=3))
    forced = np.mean([r.V[0] for r in reqs], axis=0)
    assert np.allclose(tr.vbar, forced)
    assert A.constraint_regret(tr, inst) == pytest.approx(distance(forced, inst.set_spec))


def test_general_reduces_to_feasibility():
    for seed in range(5):
        inst = I.generate("feasibility", 3, 60, 3, seed, slack=0.01)
        feas = A.run(inst, RunConfig("feasibility", seed=seed))
        gen = A.run(zero_general(inst), RunConfig("general", Z=0.7, seed=seed))
        assert np.array_equal(feas.idx, gen.idx)
        assert np.allclose(gen.phi, 0.0)


def test_linear_reductions():
    inst = I.generate("linear", 2, 40, 3, 1)
    tr = A.run(inst, RunConfig("linear", Z=0.0, seed=2))
    greedy = [int(np.argmax(inst.requests[i].R)) for i in tr.order]
    assert list(tr.idx) == greedy
    flat = inst.with_requests([Request(r.V, np.full(r.k, 0.5)) for r in inst.requests], inst.witness)
    feas = A.run(flat, RunConfig("feasibility", seed=2))
    lin = A.run(flat, RunConfig("linear", Z=1.3, seed=2))
    assert np.array_equal(feas.idx, lin.idx)
    with pytest.raises(ValueError):
        A.run(I.generate("feasibility", 2, 5, 2, 0), RunConfig("linear", Z=1.0))
    with pytest.raises(ValueError):
        A.run(inst, RunConfig("linear"))


def test_general_first_step_and_missing_z():
    inst = I.generate("general", 2, 6, 2, 4)
    tr = A.run(inst, RunConfig("general", Z=1.0, seed=0))
    assert tr.idx[0] == 0 and np.allclose(tr.theta[0], 0) and np.allclose(tr.phi[0], 0)
    with pytest.raises(ValueError):
        A.run(inst, RunConfig("general"))


def test_general_tiny_instance_against_brute_force():
    for seed in range(10):
        inst = I.generate("general", 2, 6, 2, 100 + seed, objective="capped", slack=0.05)
        Z = fractional_opt(inst).lam
        L = inst.objective.lipschitz(inst.set_spec.distance_norm)
        tr = A.run(inst, RunConfig("general", Z=Z, seed=seed))
        opt = brute_force_opt(inst).value
        assert inst.objective.value(tr.vbar) >= opt - 2 * (Z + L) * 1.5


def packing_hand_instance(T=4):
    reqs = tuple(Request([[1.0], [0.0]], [1.0, 0.0]) for _ in range(T))
    return Instance(1, T, "packing", budget_cap([0.5]), LinearReward(1), reqs, budget=T / 2)


def test_packing_hand_trace():
    inst = packing_hand_instance()
    tr = A.run_packing(inst, RunConfig("packing", Z=2.0, epsilon=0.5, seed=0),
                       I.StreamOrder("rp", 0, np.arange(4)))
    w = 1.5 ** 0.5
    assert list(tr.idx) == [0, 1, 0]
    assert np.allclose(tr.theta[:, 0], [0.5, w / (1 + w), 0.5])
    assert tr.tau == 3 and tr.total_reward == 2.0
    assert np.array_equal(tr.consumption, [2.0]) and np.array_equal(tr.overshoot, [0.0])
    assert inst.budget - 1 <= tr.total_reward <= inst.budget


def test_packing_zero_rewards_pick_zero_option():
    inst = I.generate("packing", 2, 30, 2, 5)
    zero = inst.with_requests([Request(r.V, np.zeros(r.k)) for r in inst.requests], inst.witness)
    tr = A.run(zero, RunConfig("packing", Z=1.0, seed=1))
    assert tr.total_reward == 0 and np.all(tr.idx == 0) and tr.tau == 30


def test_packing_hard_safety_fuzz():
    for seed in range(40):
        r = np.random.default_rng(seed)
        d, T = int(r.integers(1, 4)), int(r.integers(5, 60))
        inst = I.generate("packing", d, T, int(r.integers(1, 4)), seed, budget=float(r.uniform(0.5, T / 3)))
        tr = A.run(inst, RunConfig("packing", Z=float(r.uniform(0, 3)), epsilon=float(r.uniform(0.05, 0.9)),
                                   seed=seed, stream=("rp", "iid")[seed % 2]))
        assert tr.steps == tr.tau <= T
        assert np.all(tr.overshoot < 1)
        if tr.tau < T:
            assert np.any(tr.consumption >= tr.budget)
            assert np.all(tr.consumption < tr.budget + 1)
        assert A.check_dual_feasibility(tr, inst)


def test_packing_config_validation():
    with pytest.raises(ValueError):
        RunConfig("packing", Z=1.0, epsilon=1.5)
    with pytest.raises(ValueError):
        RunConfig("general", Z=-1.0)
    with pytest.raises(ValueError):
        RunConfig("simplex")
    with pytest.raises(ValueError):
        A.run(I.generate("feasibility", 2, 5, 2, 0), RunConfig("packing", Z=1.0))


def test_smooth_single_step_and_rejection():
    inst = I.generate("smooth", 2, 5, 3, 0)
    tr = A.run(inst, RunConfig("smooth", Z=1.0, T_out=1, stream="iid"))
    assert tr.steps == 1 and tr.T == 1
    nonsmooth = Instance(2, inst.T, "general", inst.set_spec,
                         SeparableConcave([CappedPiece(1, 0.5), CappedPiece(1, 0.5)]), inst.requests)
    with pytest.raises(UnsupportedVariant):
        A.run(nonsmooth, RunConfig("smooth", Z=1.0))
    with pytest.raises(ValueError):
        A.run(inst, RunConfig("smooth"))


def test_smooth_first_choice_is_lowest_index_when_scores_tie():
    # phi_1 = theta_1 = 0 whenever 0 lies in both gradient boxes
    reqs = tuple(Request([[0.3, 0.3], [0.6, 0.1]]) for _ in range(3))
    f = QuadraticConcave([0.0, 0.0], [0.5, 0.5], 1.0)
    inst = Instance(2, 3, "smooth", budget_cap([0.5, 0.5]), f, reqs)
    tr = A.run(inst, RunConfig("smooth", Z=1.0))
    assert tr.idx[0] == 0 and np.allclose(tr.phi[0], 0) and np.allclose(tr.theta[0], 0)


def test_smooth_unconstrained_limit_is_greedy():
    # caps never bind and f is linear-dominant: each step takes the option best for the gradient
    r = np.random.default_rng(0)
    a = np.array([2.0, 1.0])
    f = QuadraticConcave(a, [0.5, 0.5], 1e-3)
    reqs = tuple(Request(r.uniform(0, 1, (3, 2))) for _ in range(50))
    inst = Instance(2, 50, "smooth", budget_cap([1.0, 1.0]), f, reqs)
    tr = A.run(inst, RunConfig("smooth", Z=1.0, seed=1))
    greedy = [int(np.argmax(inst.requests[i].V @ a)) for i in tr.order]
    assert np.mean(np.array(greedy[1:]) == tr.idx[1:]) == 1.0


@pytest.mark.parametrize("algo,kind", [("feasibility", "feasibility"), ("general", "general"),
                                       ("linear", "linear"), ("smooth", "smooth"),
                                       ("packing", "packing")])
def test_dual_iterates_stay_in_domain(algo, kind):
    inst = I.generate(kind, 3, 80, 3, 7, norm="euclidean" if algo == "smooth" else "maxabs")
    tr = A.run(inst, RunConfig(algo, Z=0.8, seed=1))
    assert A.check_dual_feasibility(tr, inst)
    assert tr.steps == tr.tau and np.all(tr.idx < 3 + (kind == "packing"))


def test_signed_mw_theta_learner():
    inst = I.generate("feasibility", 2, 50, 3, 0)
    tr = A.run(inst, RunConfig("feasibility", theta_learner="signed_mw", seed=0))
    assert A.check_dual_feasibility(tr, inst)
    with pytest.raises(ValueError):
        A.run(I.generate("feasibility", 2, 5, 2, 0, norm="euclidean"),
              RunConfig("feasibility", theta_learner="signed_mw"))


def test_phase_bounds():
    assert A.phase_bounds(1) == [(0, 1)]
    assert A.phase_bounds(10) == [(0, 1), (1, 2), (2, 4), (4, 8), (8, 10)]
    b = A.phase_bounds(100)
    assert b[-1][1] == 100 and all(x[1] == y[0] for x, y in zip(b, b[1:]))


def test_phased_run():
    inst = I.generate("general", 2, 12, 2, 3, slack=0.1)
    tr = A.run(inst, RunConfig("phased", seed=2))
    L = inst.objective.lipschitz(inst.set_spec.distance_norm)
    assert tr.idx[0] == 0 and tr.steps == 12
    assert tr.Z_used[0] == pytest.approx(2 * L) and all(z >= 2 * L - 1e-9 for z in tr.Z_used)
    assert len(tr.Z_used) == len(A.phase_bounds(12)) - 1


@pytest.mark.parametrize("algo,kind", [("feasibility", "feasibility"), ("general", "general"),
                                       ("packing", "packing"), ("smooth", "smooth")])
def test_runs_are_deterministic(algo, kind):
    inst = I.generate(kind, 2, 40, 3, 1)
    cfg = RunConfig(algo, Z=0.5, seed=9, stream="iid", T_out=60)
    a, b = A.run(inst, cfg), A.run(inst, cfg)
    assert np.array_equal(a.idx, b.idx) and np.array_equal(a.theta, b.theta)
    assert a.V.tobytes() == b.V.tobytes()

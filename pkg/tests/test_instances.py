import gzip
import json
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ostoc import instances as I
from ostoc.convex_sets import budget_cap, distance
from ostoc.instances import InstanceFormatError, Request
from ostoc.objectives import LinearReward, ZeroObjective


def tiny(kind="feasibility", T=4, seed=0, **kw):
    return I.generate(kind, 2, T, 2, seed, **kw)


def test_generate_is_deterministic():
    for kind in I.KINDS:
        a, b = I.generate(kind, 2, 12, 3, 5), I.generate(kind, 2, 12, 3, 5)
        assert a.dumps() == b.dumps() and a.digest() == b.digest()
    assert I.generate("feasibility", 2, 12, 3, 5).dumps() != I.generate("feasibility", 2, 12, 3, 6).dumps()


def test_packing_requests_contain_zero_option():
    inst = I.generate("packing", 3, 40, 3, 1, budget=5.0)
    assert inst.budget == 5.0 and np.allclose(inst.set_spec.upper, 5.0 / 40)
    for req in inst.requests:
        assert np.all(req.V[0] == 0) and req.R[0] == 0


@pytest.mark.parametrize("kind", ["feasibility", "general", "linear", "covering", "smooth"])
def test_witness_replay_lands_in_set(kind):
    for seed in range(5):
        inst = I.generate(kind, 3, 30, 3, seed, slack=0.02)
        assert distance(inst.witness_average(), inst.set_spec) <= 1e-9


def test_tight_mode_witness_and_rejection():
    inst = I.generate("feasibility", 4, 60, 3, 2, tight=True)
    assert distance(inst.witness_average(), inst.set_spec) <= 1e-9
    assert inst.set_spec.label == "budget_cap"
    with pytest.raises(ValueError):
        I.generate("linear", 2, 10, 2, 0, tight=True)


def test_generate_rejects_bad_parameters():
    with pytest.raises(ValueError):
        I.generate("feasibility", 0, 5)
    with pytest.raises(ValueError):
        I.generate("nonsense", 2, 5)
    with pytest.raises(ValueError):
        I.generate("packing", 2, 5, budget=0.0)
    with pytest.raises(ValueError):
        I.generate("feasibility", 2, 5, slack=-0.1)


def test_generated_values_in_unit_interval():
    count = 0
    for kind, seed in itertools.product(["feasibility", "general", "linear", "covering", "packing"], range(200)):
        inst = I.generate(kind, 1 + seed % 4, 3 + seed % 7, 1 + seed % 3, seed)
        for req in inst.requests:
            assert np.all((req.V >= 0) & (req.V <= 1))
            if req.R is not None:
                assert np.all((req.R >= 0) & (req.R <= 1))
        count += 1
    assert count == 1000


@pytest.mark.parametrize("kind", I.KINDS)
def test_serialization_roundtrip_is_byte_identical(kind, tmp_path):
    inst = I.generate(kind, 2, 7, 3, 4)
    text = inst.dumps()
    assert I.loads(text).dumps() == text
    for name in ("a.osp.jsonl", "a.osp.jsonl.gz"):
        p = tmp_path / name
        I.save(inst, p)
        assert I.load(p).dumps() == text
    assert gzip.decompress((tmp_path / "a.osp.jsonl.gz").read_bytes()).decode() == text


def test_gzip_output_is_reproducible(tmp_path):
    inst = tiny()
    I.save(inst, tmp_path / "x.gz")
    I.save(inst, tmp_path / "y.gz")
    assert (tmp_path / "x.gz").read_bytes() == (tmp_path / "y.gz").read_bytes()


def test_file_header_layout():
    inst = I.generate("packing", 2, 3, 2, 0, budget=1.5)
    lines = inst.dumps().splitlines()
    head = json.loads(lines[0])
    assert {"d", "T", "kind", "set", "objective", "B"} <= set(head)
    assert len(lines) == 4 and json.loads(lines[1])["opts"][0] == {"v": [0.0, 0.0], "r": 0.0}


@pytest.mark.parametrize("text", [
    "",
    "not json",
    '{"format": "osp", "version": 99}',
    '{"format": "other"}',
])
def test_loads_rejects_malformed(text):
    with pytest.raises(InstanceFormatError):
        I.loads(text)


def test_instance_validation():
    S = budget_cap([0.5, 0.5])
    good = (Request([[0, 0], [0.2, 0.4]], [0.0, 0.5]),)
    with pytest.raises(InstanceFormatError):
        Request([[1.2, 0.0]])
    with pytest.raises(InstanceFormatError):
        Request([[0.2, 0.0]], [0.5, 0.5])
    with pytest.raises(InstanceFormatError):
        I.Instance(2, 2, "packing", S, LinearReward(2), good, 1.0)
    with pytest.raises(InstanceFormatError):
        I.Instance(2, 1, "packing", S, LinearReward(2), (Request([[0.1, 0.1]], [0.0]),), 1.0)
    with pytest.raises(InstanceFormatError):
        I.Instance(2, 1, "packing", S, LinearReward(2), good, None)
    with pytest.raises(InstanceFormatError):
        I.Instance(2, 1, "feasibility", S, ZeroObjective(2), good, witness=(5,))
    with pytest.raises(InstanceFormatError):
        Request.from_json({"opts": [{"v": [0.1, 0.1], "r": 0.2}, {"v": [0.1, 0.1]}]})
    req = Request([[0.1, 0.2]], [0.3])
    assert req.options[0].r == 0.3 and Request.from_json(req.to_json()).to_json() == req.to_json()


def test_rp_order_examples():
    one = I.generate("feasibility", 2, 1, 2, 0)
    assert list(I.rp_order(one, 3).order) == [0]
    inst = tiny(T=9)
    for seed in range(20):
        assert sorted(I.rp_order(inst, seed).order) == list(range(9))
    order, it = I.rp_stream(inst, 4)
    assert [r for r in it] == [inst.requests[i] for i in order.order]


def test_rp_order_is_uniform():
    inst = tiny(T=4)
    counts = {}
    for seed in range(10_000):
        key = tuple(I.rp_order(inst, seed).order)
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 24
    assert all(abs(c / 10_000 - 1 / 24) <= 0.01 for c in counts.values())


def test_iid_stream_examples():
    single = I.generate("feasibility", 2, 1, 2, 0)
    order, it = I.iid_stream(single, 1, T_out=50)
    assert set(order.order) == {0} and len(list(it)) == 50
    inst = tiny(T=5)
    a, b = I.iid_order(inst, 9, 100), I.iid_order(inst, 9, 100)
    assert np.array_equal(a.order, b.order)
    freq = np.bincount(I.iid_order(inst, 2, 10_000).order, minlength=5) / 10_000
    sigma = math.sqrt(0.2 * 0.8 / 10_000)
    assert np.all(np.abs(freq - 0.2) <= 3 * sigma)


def test_iid_weights_and_realize():
    inst = tiny(T=3)
    weighted = I.Instance(inst.d, inst.T, inst.kind, inst.set_spec, inst.objective, inst.requests,
                          witness=inst.witness, iid_weights=np.array([0.0, 1.0, 0.0]))
    assert set(I.iid_order(weighted, 0, 30).order) == {1}
    assert I.loads(weighted.dumps()).iid_weights.tolist() == [0.0, 1.0, 0.0]
    rp = I.make_order(inst, "rp", 1)
    real = I.realize(inst, rp)
    assert distance(real.witness_average(), real.set_spec) <= 1e-9
    iid = I.realize(inst, I.make_order(inst, "iid", 1, 7))
    assert iid.T == 7 and iid.witness is None
    with pytest.raises(ValueError):
        I.make_order(inst, "adversarial", 0)


def test_with_requests_rescales_budget():
    inst = I.generate("packing", 2, 20, 2, 0, budget=4.0)
    half = inst.with_requests(inst.requests[:10])
    assert half.budget == pytest.approx(2.0) and half.T == 10


@given(st.sampled_from(["feasibility", "general", "covering", "linear"]), st.integers(1, 4),
       st.integers(1, 12), st.integers(1, 4), st.integers(0, 10_000), st.floats(0, 0.2))
def test_generator_invariants(kind, d, T, k, seed, slack):
    inst = I.generate(kind, d, T, k, seed, slack=slack)
    assert inst.T == len(inst.requests) == T and all(r.V.shape == (k, d) for r in inst.requests)
    assert distance(inst.witness_average(), inst.set_spec) <= 1e-9
    assert I.loads(inst.dumps()).digest() == inst.digest()

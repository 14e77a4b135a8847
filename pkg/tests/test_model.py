import io
import json
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE1_P, EXAMPLE1_Q, golden, instance_and_belief, make_instance
from recapc.errors import InfiniteWelfareError, InstanceFormatError, ZeroLikelihoodError
from recapc.model import (
    Instance,
    bayes_update,
    dumps_instance,
    immediate_reward,
    load_instance,
    loads_instance,
    save_instance,
    walk,
)
from recapc.solvers import solve_bnb


def _doc(**overrides):
    doc = {"categories": ["k1", "k2"], "types": ["m1", "m2"], "P": EXAMPLE1_P, "q": EXAMPLE1_Q}
    doc.update(overrides)
    return json.dumps(doc)


class TestLoadInstance:
    def test_example1_document(self):
        inst = loads_instance(_doc())
        assert inst.p_max == 0.95
        assert inst.categories == ("k1", "k2")
        assert inst.types == ("m1", "m2")
        np.testing.assert_array_equal(inst.P, EXAMPLE1_P)

    def test_zero_prior_type_is_stripped(self):
        inst = loads_instance(_doc(q=[1.0, 0.0]))
        assert inst.types == ("m1",)
        np.testing.assert_array_equal(inst.q, [1.0])
        np.testing.assert_array_equal(inst.P, [[0.95], [0.79]])

    def test_stripping_renormalizes(self):
        inst = loads_instance(
            json.dumps({"categories": ["a"], "types": ["x", "y", "z"], "P": [[0.2, 0.3, 0.4]],
                        "q": [0.5, 0.0, 0.5000004]})
        )
        assert inst.types == ("x", "z")
        assert abs(inst.q.sum() - 1.0) < 1e-12

    def test_probability_one_is_infinite_welfare(self):
        with pytest.raises(InfiniteWelfareError):
            loads_instance(_doc(P=[[1.0, 0.1], [0.79, 0.81]]))

    def test_pmax_checked_after_stripping(self):
        # The certain like belongs to a type that never arrives.
        inst = loads_instance(_doc(P=[[0.5, 1.0], [0.4, 0.3]], q=[1.0, 0.0]))
        assert inst.p_max == 0.5

    def test_unknown_key_rejected(self):
        doc = json.loads(_doc())
        doc["comment"] = "hi"
        with pytest.raises(InstanceFormatError, match="comment"):
            loads_instance(json.dumps(doc))

    @pytest.mark.parametrize(
        "overrides",
        [
            {"P": [[0.95, 0.1]]},
            {"P": [[0.95, 0.1, 0.2], [0.79, 0.81, 0.3]]},
            {"q": [0.5, 0.3, 0.2]},
            {"P": [[0.95, -0.1], [0.79, 0.81]]},
            {"P": [[0.95, 1.2], [0.79, 0.81]]},
            {"q": [0.6, 0.6]},
            {"P": "nope"},
            {"categories": []},
            {"categories": ["k1", "k1"]},
        ],
    )
    def test_malformed_documents(self, overrides):
        with pytest.raises(InstanceFormatError):
            loads_instance(_doc(**overrides))

    def test_missing_key(self):
        doc = json.loads(_doc())
        del doc["q"]
        with pytest.raises(InstanceFormatError):
            loads_instance(json.dumps(doc))

    def test_not_json(self):
        with pytest.raises(InstanceFormatError):
            loads_instance("{not json")

    def test_prior_sum_tolerance(self):
        loads_instance(_doc(q=[0.5, 0.5000005]))
        with pytest.raises(InstanceFormatError):
            loads_instance(_doc(q=[0.5, 0.50002]))

    def test_round_trip(self, tmp_path, ex1):
        path = tmp_path / "x.json"
        save_instance(ex1, path)
        back = load_instance(path)
        np.testing.assert_array_equal(back.P, ex1.P)
        np.testing.assert_array_equal(back.q, ex1.q)
        assert back.categories == ex1.categories
        assert load_instance(io.StringIO(dumps_instance(ex1))).types == ex1.types

    def test_dump_key_order(self, ex1):
        assert list(json.loads(dumps_instance(ex1))) == ["categories", "types", "P", "q"]

    def test_name_order_preserved(self):
        inst = loads_instance(
            json.dumps({"categories": ["zeta", "alpha"], "types": ["b", "a"], "P": [[0.1, 0.2], [0.3, 0.4]],
                        "q": [0.3, 0.7]})
        )
        assert inst.categories == ("zeta", "alpha")
        assert inst.category_index("alpha") == 1
        assert inst.P[1, 0] == 0.3

    def test_arrays_are_read_only(self, ex1):
        with pytest.raises(ValueError):
            ex1.P[0, 0] = 0.5


class TestImmediateReward:
    def test_example1_k2(self, ex1):
        assert immediate_reward(ex1, ex1.q, 1) == pytest.approx(0.8, abs=1e-12)

    def test_example1_k1(self, ex1):
        assert immediate_reward(ex1, ex1.q, 0) == pytest.approx(0.5 * 0.95 + 0.5 * 0.1, abs=1e-12)

    def test_vertex_belief(self, ex1):
        for k, m in itertools.product(range(2), range(2)):
            assert immediate_reward(ex1, ex1.vertex(m), k) == ex1.P[k, m]


class TestBayesUpdate:
    def test_example1_k1(self, ex1):
        b = bayes_update(ex1, ex1.q, 0)
        np.testing.assert_allclose(b, [0.475 / 0.525, 0.05 / 0.525], atol=1e-12)
        np.testing.assert_allclose(b, [0.904762, 0.095238], atol=1e-6)

    def test_uniform_row_leaves_belief(self):
        inst = make_instance([[0.4, 0.4, 0.4], [0.1, 0.5, 0.9]], [0.2, 0.3, 0.5])
        b = np.array([0.1, 0.6, 0.3])
        np.testing.assert_allclose(bayes_update(inst, b, 0), b, atol=1e-15)

    def test_vertex_is_absorbing(self, ex1):
        for k in range(2):
            np.testing.assert_array_equal(bayes_update(ex1, ex1.vertex(1), k), [0.0, 1.0])

    def test_zero_likelihood(self):
        inst = make_instance([[0.0, 0.5], [0.3, 0.3]], [0.5, 0.5])
        with pytest.raises(ZeroLikelihoodError):
            bayes_update(inst, np.array([1.0, 0.0]), 0)

    def test_does_not_mutate_input(self, ex1):
        b = np.array([0.3, 0.7])
        bayes_update(ex1, b, 0)
        np.testing.assert_array_equal(b, [0.3, 0.7])


class TestWalk:
    def test_example1_two_likes(self, ex1):
        w = walk(ex1, ["k1", "k1"])
        expected = ex1.q * ex1.P[0] ** 2
        expected /= expected.sum()
        np.testing.assert_allclose(w.end_belief, expected, atol=1e-12)
        np.testing.assert_allclose(w.end_belief, [0.98895, 0.01105], atol=1e-4)
        np.testing.assert_allclose(w.rewards, [0.525, 0.95 * 0.475 / 0.525 + 0.1 * 0.05 / 0.525])

    def test_single_step(self, ex1):
        start = np.array([0.25, 0.75])
        w = walk(ex1, [1], start)
        assert len(w) == 1
        np.testing.assert_array_equal(w.steps[0].belief, start)

    def test_empty_prefix_rejected(self, ex1):
        with pytest.raises(ValueError):
            walk(ex1, [])

    def test_steps_chain(self, ex1):
        w = walk(ex1, [0, 1, 1, 0])
        for a, b in zip(w.steps, list(w.steps[1:])):
            np.testing.assert_allclose(b.belief, bayes_update(ex1, a.belief, a.category), atol=1e-9)

    def test_golden_a1_optimal_prefix_approaches_m3(self):
        inst = golden("A1")
        b = inst.q
        prefix = []
        for _ in range(40):
            k = solve_bnb(inst, 1e-9, belief=b).first_action
            prefix.append(k)
            b = bayes_update(inst, b, k)
        masses = walk(inst, prefix).beliefs[:, 2]
        assert masses[-1] > 0.99
        assert masses[-1] > masses[10] > masses[0]


class TestUpdateProperties:
    @settings(max_examples=200, deadline=None)
    @given(instance_and_belief(), st.data())
    def test_commutativity(self, ib, data):
        inst, b = ib
        k1 = data.draw(st.integers(0, inst.n_categories - 1))
        k2 = data.draw(st.integers(0, inst.n_categories - 1))
        left = bayes_update(inst, bayes_update(inst, b, k1), k2)
        right = bayes_update(inst, bayes_update(inst, b, k2), k1)
        np.testing.assert_allclose(left, right, rtol=0, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(instance_and_belief(), st.data())
    def test_monotone_self_reinforcement(self, ib, data):
        inst, b = ib
        k = data.draw(st.integers(0, inst.n_categories - 1))
        after = immediate_reward(inst, bayes_update(inst, b, k), k)
        assert after >= immediate_reward(inst, b, k) - 1e-12

    @settings(max_examples=200, deadline=None)
    @given(instance_and_belief(), st.data())
    def test_normalization(self, ib, data):
        inst, b = ib
        prefix = data.draw(st.lists(st.integers(0, inst.n_categories - 1), min_size=1, max_size=30))
        for step in walk(inst, prefix, b).beliefs:
            assert abs(step.sum() - 1.0) <= 1e-9
            assert np.all(step >= 0)

    @settings(max_examples=150, deadline=None)
    @given(instance_and_belief(), st.data())
    def test_order_only_dependence(self, ib, data):
        inst, b = ib
        prefix = data.draw(st.lists(st.integers(0, inst.n_categories - 1), min_size=1, max_size=12))
        shuffled = data.draw(st.permutations(prefix))
        np.testing.assert_allclose(
            walk(inst, prefix, b).end_belief, walk(inst, shuffled, b).end_belief, atol=1e-12
        )

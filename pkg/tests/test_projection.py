import numpy as np
import pytest

from pathfair.model import InputError, commodity_sums, edge_loads, validate_allocation
from pathfair.projection import project, score_paths

from helpers import chain, diamond, make_instance, shared_edge


def test_scores_zero_without_violations():
    inst = chain()
    scores = score_paths(inst, np.array([1.0, 1.0, 1.0]), 2)
    assert scores == pytest.approx([0.0, 0.0, 0.0])


def test_scores_count_violated_edges_at_alpha_zero():
    inst = chain()
    # 20 on the A->B path overloads only the first edge.
    scores = score_paths(inst, np.array([20.0, 0.0, 0.0]), 0)
    assert scores == pytest.approx([1.0, 1.0, 0.0])


def test_scores_weight_counts_by_powered_sums():
    inst = make_instance(
        [("A", "B", 1, 1), ("B", "C", 1, 1), ("C", "D", 1, 1)],
        [("A", "D", 50, [(0, 1, 2)])],
    )
    # Sum 2 at alpha=2 over three violated edges: 2^2 * 3.
    assert score_paths(inst, np.array([2.0]), 2) == pytest.approx([12.0])


def test_edge_trim_breaks_ties_by_path_index():
    inst = shared_edge(2, cap=10.0, demand=20.0)
    out = project(inst, np.array([6.0, 6.0]), 0)
    assert out == pytest.approx([4.0, 6.0])


def test_demand_trim_runs_before_edge_trim():
    inst = make_instance(
        [
            ("A", "P", 100, 1), ("P", "M", 100, 1),
            ("A", "Q", 100, 1), ("Q", "M", 100, 1),
            ("M", "B", 5, 1),
        ],
        [("A", "B", 5, [(0, 1, 4), (2, 3, 4)])],
    )
    out = project(inst, np.array([4.0, 3.0]), 0)
    # Demand excess of 2 comes off the tied lower-index path; the shared
    # edge is then exactly full and needs no second trim.
    assert out == pytest.approx([2.0, 3.0])
    assert edge_loads(inst, out)[4] == pytest.approx(5.0)


def test_negative_rates_clamp_to_zero():
    inst = shared_edge(2, cap=10.0, demand=20.0)
    out = project(inst, np.array([-1.0, 5.0]), 0)
    assert out == pytest.approx([0.0, 5.0])


def test_rejects_bad_input():
    inst = chain()
    with pytest.raises(InputError):
        project(inst, np.array([1.0, 2.0]), 0)
    with pytest.raises(InputError):
        project(inst, np.array([1.0, np.nan, 2.0]), 0)


def _random_inputs(inst, rng, n):
    for _ in range(n):
        kind = rng.integers(3)
        if kind == 0:
            yield rng.uniform(-5.0, 30.0, inst.num_paths)
        elif kind == 1:
            # Hug the capacity boundary to within an ulp or two.
            base = np.min(inst.capacity) / max(inst.num_paths, 1)
            yield np.full(inst.num_paths, base) + rng.uniform(-1e-9, 1e-9, inst.num_paths)
        else:
            yield rng.uniform(0.0, 2.0, inst.num_paths) * np.max(inst.demand)


@pytest.mark.parametrize("alpha", [0, 1, 3])
def test_projection_properties(alpha):
    rng = np.random.default_rng(17 + alpha)
    for inst in (chain(), diamond(), shared_edge(3, cap=7.0, demand=4.0)):
        for raw in _random_inputs(inst, rng, 40):
            out = project(inst, raw, alpha)
            clamped = np.maximum(raw, 0.0)

            report = validate_allocation(inst, out)
            assert report.feasible, report

            assert np.all(out >= 0.0)
            assert np.all(out <= clamped + 1e-12)

            again = project(inst, out, alpha)
            assert np.array_equal(again, out)

            # Total trim never exceeds the total initial violation.
            excess = np.maximum(commodity_sums(inst, clamped) - inst.demand, 0.0)
            overload = np.maximum(edge_loads(inst, clamped) - inst.capacity, 0.0)
            removed = clamped.sum() - out.sum()
            assert removed <= excess.sum() + overload.sum() + 1e-6


def test_projection_is_deterministic():
    inst = diamond()
    raw = np.array([17.3, 5.9])
    a = project(inst, raw, 1)
    b = project(inst, raw, 1)
    assert np.array_equal(a, b)

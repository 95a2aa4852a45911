import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from mvcrec.evaluation import KS, MetricReport, evaluate, hr_at_k, ndcg_at_k, rank_target, rank_targets, report_from_ranks


def sort_rank(scores, target):
    """Oracle: stable sort on (-score, index) and look the target up."""
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return order.index(target - 1) + 1


def test_rank_top_item():
    assert rank_target([0.1, 0.9, 0.3], 2) == 1


def test_rank_ties_broken_by_index():
    assert rank_target(np.zeros(10), 7) == 7
    assert rank_target(np.zeros(10), 1) == 1


def test_rank_matches_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 40))
        # coarse scores so ties are common
        scores = rng.integers(0, 5, size=n).astype(float)
        t = int(rng.integers(1, n + 1))
        assert rank_target(scores, t) == sort_rank(scores.tolist(), t)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.data())
def test_batched_matches_single(scores, data):
    t = data.draw(st.integers(1, len(scores)))
    got = rank_targets(torch.tensor([scores], dtype=torch.float64), torch.tensor([t]))
    assert got.item() == rank_target(scores, t)


def test_rank_invariant_to_constant_shift():
    rng = np.random.default_rng(1)
    s = rng.normal(size=50)
    assert all(rank_target(s, t) == rank_target(s + 3.5, t) for t in range(1, 51))


def test_rank_target_range():
    with pytest.raises(ValueError):
        rank_target([1.0, 2.0], 3)


def test_hr_and_ndcg_hand_values():
    assert hr_at_k([1, 6, 20], 5) == pytest.approx(1 / 3)
    assert ndcg_at_k([4], 5) == pytest.approx(1 / math.log2(5))
    assert ndcg_at_k([4], 5) == pytest.approx(0.43068, abs=1e-5)
    assert ndcg_at_k([1], 5) == 1.0
    assert ndcg_at_k([6], 5) == 0.0


@given(st.lists(st.integers(1, 100), min_size=1, max_size=40))
def test_metric_monotone_and_bounded(ranks):
    for k_small, k_big in zip(KS, KS[1:]):
        assert hr_at_k(ranks, k_small) <= hr_at_k(ranks, k_big)
        assert ndcg_at_k(ranks, k_small) <= ndcg_at_k(ranks, k_big)
    for k in KS:
        assert 0.0 <= ndcg_at_k(ranks, k) <= hr_at_k(ranks, k) <= 1.0


@pytest.mark.parametrize("fn", [hr_at_k, ndcg_at_k])
def test_empty_and_bad_k(fn):
    with pytest.raises(ValueError):
        fn([], 5)
    with pytest.raises(ValueError):
        fn([1], 0)


def test_report_keys_and_json():
    report = report_from_ranks([1, 3, 30], split="valid", epoch=2)
    assert list(report.metrics) == ["HR@5", "HR@10", "HR@20", "NDCG@5", "NDCG@10", "NDCG@20"]
    js = report.to_json()
    assert js["split"] == "valid" and js["epoch"] == 2 and js["users"] == 3
    assert report["HR@5"] == pytest.approx(2 / 3)
    assert isinstance(report, MetricReport)


def test_oracle_model_scores_perfectly():
    num_items = 30
    instances = [([i, i % num_items + 1], (i + 1) % num_items + 1) for i in range(1, 31)]

    def scorer(inputs):
        out = torch.zeros(len(inputs), num_items)
        for r, seq in enumerate(inputs):
            out[r, seq[-1] % num_items] = 1.0  # next item is last + 1 (mod n)
        return out

    report = evaluate(scorer, instances, batch_size=7)
    assert all(v == 1.0 for v in report.metrics.values())


def test_uniform_random_scores_hit_rate():
    rng = np.random.default_rng(2)
    num_items, n = 100, 5000
    instances = [([1], int(t)) for t in rng.integers(1, num_items + 1, size=n)]
    gen = torch.Generator().manual_seed(0)
    report = evaluate(lambda inputs: torch.rand(len(inputs), num_items, generator=gen), instances)
    assert report["HR@10"] == pytest.approx(0.1, abs=0.015)
    assert report["HR@20"] == pytest.approx(0.2, abs=0.02)


def test_constant_scores_rank_by_index():
    instances = [([1], t) for t in (1, 5, 7, 25)]
    report = evaluate(lambda inputs: torch.zeros(len(inputs), 30), instances)
    assert report["HR@5"] == pytest.approx(0.5)
    assert report["HR@20"] == pytest.approx(0.75)


def test_exclude_history_flag():
    scores = torch.tensor([[5.0, 4.0, 3.0, 2.0]])
    instances = [([1, 2], 3)]
    assert evaluate(lambda _: scores, instances)["NDCG@5"] == pytest.approx(0.5)
    assert rank_target(scores[0].numpy(), 3) == 3
    assert rank_target(scores[0].numpy(), 3, history=[1, 2], exclude_history=True) == 1
    # the target is never excluded even if it appears in the history
    assert rank_target(scores[0].numpy(), 3, history=[3], exclude_history=True) == 3
    on = evaluate(lambda _: scores, instances, exclude_history=True)
    assert on["NDCG@5"] == 1.0


def test_empty_split_rejected():
    with pytest.raises(ValueError):
        evaluate(lambda _: torch.zeros(0, 3), [])

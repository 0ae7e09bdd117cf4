import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panoptikit.fusion import FusionParams, fuse_panoptic
from panoptikit.metrics import (
    PQStats,
    image_stats,
    match_segments,
    pq_evaluate,
    pq_reduce,
    report_from_stats,
)
from panoptikit.synth import SceneSpec, synth_scene

from oracles import pq_stats_reference, result_from_ids


def categories_of(*results):
    cats = {}
    for r in results:
        for c, t in r.table.categories().items():
            cats.setdefault(c, t)
    return cats


def noisy_scene_pair(seed: int, size: int = 64):
    scene = synth_scene(
        SceneSpec(seed=seed, height=size, width=size, box_jitter=2.0, flip_prob=0.02,
                  score_noise=0.05, min_instances=2, max_instances=5, stuff_regions=2)
    )
    pred = fuse_panoptic(scene.scored, scene.stuff_probs, FusionParams(), scene.stuff_categories)
    return pred, scene.gt


class TestMatchSegments:
    def test_identical_maps_all_matched_iou_one(self):
        ids = np.zeros((8, 8), dtype=np.int32)
        ids[0:4] = 1
        ids[4:, 0:4] = 2
        result = result_from_ids(ids, {1: (1, True), 2: (2, False)})
        matches = match_segments(result, result)
        assert [(p, g) for p, g, _ in matches] == [(1, 1), (2, 2)]
        assert all(iou == 1.0 for _, _, iou in matches)

    def test_exact_half_overlap_not_matched(self):
        gt_ids = np.zeros((4, 8), dtype=np.int32)
        gt_ids[:, 0:4] = 1  # 16 px
        pred_ids = np.zeros((4, 8), dtype=np.int32)
        pred_ids[0:2, 0:4] = 1  # 8 px, all inside gt -> IoU = 8/16 = 0.5
        gt = result_from_ids(gt_ids, {1: (3, True)})
        pred = result_from_ids(pred_ids, {1: (3, True)})
        assert match_segments(pred, gt) == []

    def test_category_must_agree(self):
        ids = np.ones((4, 4), dtype=np.int32)
        pred = result_from_ids(ids, {1: (1, True)})
        gt = result_from_ids(ids, {1: (2, True)})
        assert match_segments(pred, gt) == []

    def test_gt_void_excluded_from_union(self):
        gt_ids = np.zeros((4, 8), dtype=np.int32)
        gt_ids[:, 0:4] = 1  # right half void
        pred_ids = np.ones((4, 8), dtype=np.int32)  # covers everything
        gt = result_from_ids(gt_ids, {1: (1, True)})
        pred = result_from_ids(pred_ids, {1: (1, True)})
        matches = match_segments(pred, gt)
        # union = 32 + 16 - 16 - 16(void overlap) = 16 -> IoU 1.0
        assert matches == [(1, 1, 1.0)]

    def test_shape_mismatch(self):
        a = result_from_ids(np.ones((2, 2), dtype=np.int32), {1: (1, True)})
        b = result_from_ids(np.ones((3, 3), dtype=np.int32), {1: (1, True)})
        with pytest.raises(ValueError, match="shape mismatch"):
            match_segments(a, b)


class TestImageStats:
    def test_pred_mostly_void_not_fp(self):
        gt_ids = np.zeros((8, 8), dtype=np.int32)  # all void
        pred_ids = np.zeros((8, 8), dtype=np.int32)
        pred_ids[0:4] = 1
        gt = result_from_ids(gt_ids, {})
        pred = result_from_ids(pred_ids, {1: (1, True)})
        stats = image_stats(pred, gt, {1: True})
        assert stats.fp[1] == 0 and stats.tp[1] == 0 and stats.fn[1] == 0

    def test_unknown_category_rejected(self):
        ids = np.ones((2, 2), dtype=np.int32)
        r = result_from_ids(ids, {1: (42, True)})
        with pytest.raises(ValueError, match="missing from the registry"):
            image_stats(r, r, {1: True})

    def test_agrees_with_allpairs_reference(self):
        for seed in range(20):
            pred, gt = noisy_scene_pair(seed)
            cats = categories_of(pred, gt)
            stats = image_stats(pred, gt, cats)
            ref = pq_stats_reference(pred, gt, cats)
            for c in cats:
                assert (stats.tp[c], stats.fp[c], stats.fn[c]) == tuple(ref[c][:3]), f"cat {c}"
                assert stats.iou_sum[c] == pytest.approx(ref[c][3], abs=1e-9)
                # every matched IoU lies in (0.5, 1], so the sum is bracketed
                assert stats.iou_sum[c] <= stats.tp[c]
                if stats.tp[c] > 0:
                    assert stats.iou_sum[c] > 0.5 * stats.tp[c]


class TestPqEvaluate:
    def test_perfect_prediction(self):
        ids = np.zeros((8, 8), dtype=np.int32)
        ids[0:4] = 1
        ids[4:] = 2
        r = result_from_ids(ids, {1: (1, True), 2: (7, False)})
        report = pq_evaluate([(r, r)], {1: True, 7: False})
        assert report.pq == 1.0 and report.sq == 1.0 and report.rq == 1.0
        assert report.pq_things == 1.0 and report.pq_stuff == 1.0

    def test_hand_case_tp_fp_fn(self):
        # one class: a TP at IoU 0.75, one FP, one FN
        gt_ids = np.zeros((8, 8), dtype=np.int32)
        gt_ids[0:4, 0:4] = 1  # 16 px, matched below at 12/16
        gt_ids[6:8, 6:8] = 2  # missed -> FN
        pred_ids = np.zeros((8, 8), dtype=np.int32)
        pred_ids[0:3, 0:4] = 1  # 12 px inside gt 1 -> IoU 12/16 = 0.75
        pred_ids[3:4, 0:4] = 2  # spurious, on labeled gt (IoU 0.25) -> FP
        gt = result_from_ids(gt_ids, {1: (1, True), 2: (1, True)})
        pred = result_from_ids(pred_ids, {1: (1, True), 2: (1, True)})
        report = pq_evaluate([(pred, gt)], {1: True})
        cls = report.per_class[1]
        assert (cls.tp, cls.fp, cls.fn) == (1, 1, 1)
        assert cls.sq == pytest.approx(0.75)
        assert cls.rq == pytest.approx(0.5)
        assert cls.pq == pytest.approx(0.375)
        assert report.pq == pytest.approx(0.375)

    def test_empty_prediction_scores_zero(self):
        gt_ids = np.zeros((4, 4), dtype=np.int32)
        gt_ids[1:3, 1:3] = 1
        gt = result_from_ids(gt_ids, {1: (1, True)})
        pred = result_from_ids(np.zeros((4, 4), dtype=np.int32), {})
        report = pq_evaluate([(pred, gt)], {1: True})
        assert report.pq == 0.0
        assert report.per_class[1].fn == 1

    def test_absent_classes_excluded_from_mean(self):
        ids = np.ones((4, 4), dtype=np.int32)
        r = result_from_ids(ids, {1: (1, True)})
        report = pq_evaluate([(r, r)], {1: True, 2: True, 9: False})
        assert report.num_classes == 1
        assert report.pq == 1.0
        assert report.pq_stuff is None

    def test_pq_is_sq_times_rq(self):
        for seed in range(10):
            pred, gt = noisy_scene_pair(seed)
            cats = categories_of(pred, gt)
            report = pq_evaluate([(pred, gt)], cats)
            for cls in report.per_class.values():
                if cls.tp > 0:
                    assert abs(cls.pq - cls.sq * cls.rq) < 1e-12


class TestPqReduce:
    def stats_pair(self, seed):
        pred, gt = noisy_scene_pair(seed)
        cats = {c: c < 100 for c in range(1, 5)} | {c: False for c in (101, 102)}
        return image_stats(pred, gt, cats), cats

    def test_identity_with_empty(self):
        stats, cats = self.stats_pair(0)
        combined = pq_reduce(stats, PQStats.empty(cats))
        assert combined == stats

    @given(st.permutations(list(range(6))))
    @settings(max_examples=10, deadline=None)
    def test_order_invariance(self, order):
        cats = {c: c < 100 for c in range(1, 5)} | {c: False for c in (101, 102)}
        all_stats = []
        for seed in range(6):
            pred, gt = noisy_scene_pair(seed)
            all_stats.append(image_stats(pred, gt, cats))
        acc = PQStats.empty(cats)
        for i in order:
            acc = pq_reduce(acc, all_stats[i])
        base = PQStats.empty(cats)
        for s in all_stats:
            base = pq_reduce(base, s)
        assert acc.tp == base.tp and acc.fp == base.fp and acc.fn == base.fn
        for c in cats:
            assert acc.iou_sum[c] == pytest.approx(base.iou_sum[c], abs=1e-12)

    def test_split_halves_equals_whole(self):
        cats = {c: c < 100 for c in range(1, 5)} | {c: False for c in (101, 102)}
        pairs = [noisy_scene_pair(seed) for seed in range(6)]
        whole = pq_evaluate(pairs, cats)
        first = PQStats.empty(cats)
        for pred, gt in pairs[:3]:
            first = pq_reduce(first, image_stats(pred, gt, cats))
        second = PQStats.empty(cats)
        for pred, gt in pairs[3:]:
            second = pq_reduce(second, image_stats(pred, gt, cats))
        merged = report_from_stats(pq_reduce(first, second))
        assert merged.pq == pytest.approx(whole.pq, abs=1e-12)
        assert merged.per_class.keys() == whole.per_class.keys()

    def test_registry_mismatch_rejected(self):
        a = PQStats.empty({1: True})
        b = PQStats.empty({2: True})
        with pytest.raises(ValueError, match="different category registries"):
            pq_reduce(a, b)

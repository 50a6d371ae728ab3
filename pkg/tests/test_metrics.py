"""Tests for confusion counting, the ambiguous-label policy and metrics."""

import numpy as np
import pytest

from trifield import AmbiguousPolicy, Confusion, GroundTruthClass, confusion, metrics
from trifield.errors import LengthMismatchError
from trifield.grid import PointLabel

T, O = PointLabel.TERRAIN, PointLabel.OBSTACLE
GT_T, GT_N, GT_A = (
    GroundTruthClass.TERRAIN,
    GroundTruthClass.NON_TERRAIN,
    GroundTruthClass.AMBIGUOUS,
)


def naive_confusion(pred, gt, policy, z):
    """Independent per-point recount used as the oracle."""
    tp = fp = fn = tn = 0
    for i in range(len(pred)):
        if gt[i] == GT_A:
            if policy.kind == "exclude":
                continue
            truth = z[i] < -0.25 * policy.sensor_height
        else:
            truth = gt[i] == GT_T
        predicted = pred[i] == T
        if predicted and truth:
            tp += 1
        elif predicted and not truth:
            fp += 1
        elif not predicted and truth:
            fn += 1
        else:
            tn += 1
    return Confusion(tp=tp, fp=fp, fn=fn, tn=tn)


class TestConfusion:
    def test_gated_ambiguous_below_threshold_counts_terrain(self):
        c = confusion(
            [T], [GT_A], policy=AmbiguousPolicy.include_with_z_gate(1.6), z=[-0.5]
        )
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 0, 0, 0)

    def test_gated_ambiguous_above_threshold_counts_non_terrain(self):
        c = confusion(
            [T], [GT_A], policy=AmbiguousPolicy.include_with_z_gate(1.6), z=[0.5]
        )
        assert (c.tp, c.fp, c.fn, c.tn) == (0, 1, 0, 0)

    def test_excluded_ambiguous_contributes_nothing(self):
        c = confusion([T], [GT_A], policy=AmbiguousPolicy.exclude())
        assert c.total == 0

    def test_non_terrain_predicted_terrain_is_fp_under_both(self):
        for policy, z in (
            (AmbiguousPolicy.exclude(), None),
            (AmbiguousPolicy.include_with_z_gate(1.6), [0.0]),
        ):
            c = confusion([T], [GT_N], policy=policy, z=z)
            assert c.fp == 1 and c.total == 1

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            confusion([T, O], [GT_T], policy=AmbiguousPolicy.exclude())

    def test_gate_needs_z(self):
        with pytest.raises(ValueError):
            confusion([T], [GT_A], policy=AmbiguousPolicy.include_with_z_gate(1.6))

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            AmbiguousPolicy.include_with_z_gate(0.0)
        with pytest.raises(ValueError):
            AmbiguousPolicy("bogus")


class TestMetrics:
    def test_arithmetic(self):
        p, r, f1, a = metrics(Confusion(tp=9, fp=1, fn=1, tn=9))
        assert (p, r, f1, a) == (0.9, 0.9, pytest.approx(0.9), 0.9)

    def test_perfect(self):
        assert metrics(Confusion(tp=10, fp=0, fn=0, tn=5)) == (1.0, 1.0, 1.0, 1.0)

    def test_zero_over_zero_convention(self):
        p, r, f1, a = metrics(Confusion(tp=0, fp=0, fn=5, tn=0))
        assert (p, r, f1) == (0.0, 0.0, 0.0)

    def test_scale_free(self):
        base = Confusion(tp=8, fp=3, fn=2, tn=7)
        scaled = Confusion(tp=80, fp=30, fn=20, tn=70)
        assert metrics(base) == pytest.approx(metrics(scaled))


class TestPolicyIdentities:
    def test_exclude_equals_gated_after_deleting_ambiguous(self):
        rng = np.random.default_rng(41)
        n = 5000
        pred = rng.integers(0, 2, n)
        gt = rng.integers(0, 3, n)
        z = rng.normal(0, 1, n)
        keep = gt != GT_A
        a = confusion(pred, gt, policy=AmbiguousPolicy.exclude())
        b = confusion(
            pred[keep], gt[keep], policy=AmbiguousPolicy.include_with_z_gate(1.6), z=z[keep]
        )
        assert (a.tp, a.fp, a.fn, a.tn) == (b.tp, b.fp, b.fn, b.tn)

    def test_totals_conserved(self):
        rng = np.random.default_rng(42)
        n = 3000
        pred = rng.integers(0, 2, n)
        gt = rng.integers(0, 3, n)
        z = rng.normal(0, 1, n)
        gated = confusion(pred, gt, policy=AmbiguousPolicy.include_with_z_gate(1.6), z=z)
        assert gated.total == n
        excl = confusion(pred, gt, policy=AmbiguousPolicy.exclude())
        assert excl.total == int(np.count_nonzero(gt != GT_A))

    def test_matches_naive_recount(self):
        rng = np.random.default_rng(43)
        n = 20000
        pred = rng.integers(0, 2, n)
        gt = rng.integers(0, 3, n)
        z = rng.normal(-0.2, 0.8, n)
        for policy in (
            AmbiguousPolicy.exclude(),
            AmbiguousPolicy.include_with_z_gate(1.73),
        ):
            fast = confusion(pred, gt, policy=policy, z=z)
            slow = naive_confusion(pred, gt, policy, z)
            assert (fast.tp, fast.fp, fast.fn, fast.tn) == (
                slow.tp,
                slow.fp,
                slow.fn,
                slow.tn,
            )

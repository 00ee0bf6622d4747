import numpy as np
import pytest

from galleryscope.data import ArtworkInstance, CaptureRecord, GalleryManifest, LabelSpace
from galleryscope.evaluate import (
    EvalReport,
    Prediction,
    aggregate_splits,
    accuracy_curve,
    build_eval_report,
    build_visit_record,
    distinct_coverage,
    format_percent,
    prediction_from_scores,
    report_to_csv,
    report_to_svg,
    split_topk_accuracy,
    topk_hit,
)


def rec(t, *gt):
    return CaptureRecord(f"f{t}.png", t, tuple(gt))


def pred(label, capture="x"):
    return Prediction(capture, label)


# --- topk_hit ------------------------------------------------------------------

def test_topk_first_label_hits_at_1():
    assert topk_hit("a", ("a", "b", "c"), 1)


def test_topk_third_label():
    gt = ("a", "b", "c")
    assert not topk_hit("c", gt, 1)
    assert topk_hit("c", gt, 3)


def test_topk_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    labels = [f"L{i}" for i in range(12)]
    for _ in range(1000):
        gt = tuple(rng.choice(labels, size=rng.integers(1, 6), replace=False))
        p = labels[rng.integers(0, len(labels))]
        k = int(rng.integers(1, 12))
        expected = p in set(list(gt)[:min(k, len(gt))])  # independent set-membership oracle
        assert topk_hit(p, gt, k) == expected


def test_topk_validates_inputs():
    with pytest.raises(ValueError):
        topk_hit("a", ("a",), 0)
    with pytest.raises(ValueError):
        topk_hit("a", (), 1)


# --- split accuracy --------------------------------------------------------------

def test_all_correct_gives_one():
    records = [rec(t, "a") for t in range(5)]
    preds = [pred("a") for _ in range(5)]
    assert split_topk_accuracy(preds, records, 1) == 1.0


def test_never_in_gt_gives_zero_at_all_k():
    records = [rec(t, "a", "b") for t in range(4)]
    preds = [pred("z") for _ in range(4)]
    for k in range(1, 6):
        assert split_topk_accuracy(preds, records, k) == 0.0


def test_split_accuracy_matches_counting_oracle():
    rng = np.random.default_rng(1)
    labels = [f"L{i}" for i in range(8)]
    records, preds = [], []
    for t in range(50):
        gt = tuple(rng.choice(labels, size=rng.integers(1, 5), replace=False))
        records.append(rec(t, *gt))
        preds.append(pred(labels[rng.integers(0, 8)]))
    for k in (1, 2, 3, 7):
        hits = 0
        for p, r in zip(preds, records):   # hand-rolled tally
            if p.label in list(r.ordered_gt)[:k]:
                hits += 1
        assert split_topk_accuracy(preds, records, k) == hits / 50


def test_count_mismatch_rejected():
    with pytest.raises(ValueError, match="1-1"):
        split_topk_accuracy([pred("a")], [], 1)


# --- aggregation ------------------------------------------------------------------

def test_identical_curves_zero_std():
    mean, std = aggregate_splits([[0.5, 0.6], [0.5, 0.6], [0.5, 0.6]])
    assert mean == [0.5, 0.6]
    assert std == [0.0, 0.0]


def test_two_point_sample_std():
    mean, std = aggregate_splits([[0.2], [0.4]])
    assert mean[0] == pytest.approx(0.3)
    assert std[0] == pytest.approx(0.14142135623730953)


def test_single_split_std_zero_by_convention():
    mean, std = aggregate_splits([[0.7, 0.8]])
    assert std == [0.0, 0.0]


def test_unequal_curves_rejected():
    with pytest.raises(ValueError, match="unequal"):
        aggregate_splits([[0.1, 0.2], [0.3]])


def test_aggregate_permutation_invariant():
    curves = [[0.2, 0.5], [0.4, 0.6], [0.1, 0.9]]
    m1, s1 = aggregate_splits(curves)
    m2, s2 = aggregate_splits(list(reversed(curves)))
    assert m1 == pytest.approx(m2)
    assert s1 == pytest.approx(s2)


def test_percent_formatting():
    assert format_percent(0.426) == "42.6%"
    assert format_percent(0.4779) == "47.8%"
    assert format_percent(1.0) == "100.0%"


# --- coverage ----------------------------------------------------------------------

def coverage_fixture(n_instances, n_recognized):
    instances = [ArtworkInstance(f"i{j:03d}", "planar") for j in range(n_instances)]
    manifest = GalleryManifest(instances, ["background"], [], {}, {})
    records, preds = [], []
    for j in range(n_instances):
        aid = instances[j].id
        records.append(rec(j, aid))
        preds.append(pred(aid if j < n_recognized else "background"))
    return preds, records, manifest


@pytest.mark.parametrize("n,recognized,expected", [(79, 36, 0.456), (113, 54, 0.478),
                                                   (44, 15, 0.341)])
def test_coverage_published_fixtures(n, recognized, expected):
    preds, records, manifest = coverage_fixture(n, recognized)
    assert round(distinct_coverage(preds, records, manifest), 3) == expected


def test_coverage_requires_instance_in_gt():
    instances = [ArtworkInstance("a", "planar"), ArtworkInstance("b", "planar")]
    manifest = GalleryManifest(instances, ["background"], [], {}, {})
    # prediction "a" on a frame whose gt is b only: a lucky misfire, not coverage
    assert distinct_coverage([pred("a")], [rec(0, "b")], manifest) == 0.0
    # repeated correct hits of the same instance count once
    preds = [pred("a"), pred("a")]
    records = [rec(0, "a"), rec(1, "a", "b")]
    assert distinct_coverage(preds, records, manifest) == 0.5


def test_coverage_numerator_bounded_by_seen_instances():
    rng = np.random.default_rng(3)
    instances = [ArtworkInstance(f"i{j}", "planar") for j in range(10)]
    manifest = GalleryManifest(instances, ["background"], [], {}, {})
    ids = [a.id for a in instances]
    records, preds = [], []
    seen = set()
    for t in range(30):
        gt = tuple(rng.choice(ids[:6], size=rng.integers(1, 3), replace=False))
        seen.update(gt)
        records.append(rec(t, *gt))
        preds.append(pred(ids[rng.integers(0, 10)]))
    cov = distinct_coverage(preds, records, manifest)
    assert cov * len(instances) <= len(seen)


# --- visit records -------------------------------------------------------------------

def test_visit_record_all_background_empty():
    records = [rec(t, "background") for t in range(4)]
    preds = [pred("background") for _ in range(4)]
    vr = build_visit_record(preds, records)
    assert vr.counts == {} and vr.sequence == []


def test_visit_record_steps():
    records = [rec(3, "A"), rec(4, "A"), rec(5, "A"), rec(6, "B")]
    preds = [pred("A"), pred("A"), pred("A"), pred("X")]
    vr = build_visit_record(preds, records)
    assert vr.counts == {"A": 3}
    assert vr.first_step["A"] == 3 and vr.last_step["A"] == 5
    assert vr.sequence == [(3, "A"), (4, "A"), (5, "A")]


def test_visit_record_matches_tally_oracle():
    rng = np.random.default_rng(4)
    ids = [f"i{j}" for j in range(5)]
    records, preds = [], []
    for t in range(60):
        gt = tuple(rng.choice(ids, size=rng.integers(1, 3), replace=False))
        records.append(rec(t, *gt))
        preds.append(pred(ids[rng.integers(0, 5)]))
    vr = build_visit_record(preds, records)
    tally = {}
    for p, r in zip(preds, records):       # brute-force tally
        if p.label == r.ordered_gt[0] and p.label != "background":
            tally[p.label] = tally.get(p.label, 0) + 1
    assert vr.counts == tally
    assert sum(vr.counts.values()) == len(vr.sequence)


def test_visit_record_requires_chronological_order():
    records = [rec(5, "a"), rec(3, "a")]
    preds = [pred("a"), pred("a")]
    with pytest.raises(ValueError, match="chronological"):
        build_visit_record(preds, records)


# --- reports -----------------------------------------------------------------------

def tiny_report():
    instances = [ArtworkInstance("a", "planar"), ArtworkInstance("b", "planar")]
    manifest = GalleryManifest(instances, ["background"], [], {}, {})
    split_records = {
        "sp1": [rec(0, "a"), rec(1, "b", "a"), rec(2, "background")],
        "sp2": [rec(0, "b"), rec(1, "a")],
    }
    split_preds = {
        "sp1": [pred("a"), pred("a"), pred("background")],
        "sp2": [pred("b"), pred("x")],
    }
    return build_eval_report(split_preds, split_records, manifest, k_max=5)


def test_report_monotone_curves_and_fields():
    report = tiny_report()
    for curve in report.split_curves.values():
        assert all(curve[i + 1] >= curve[i] for i in range(len(curve) - 1))
        assert all(0.0 <= a <= 1.0 for a in curve)
    assert 0.0 <= report.coverage <= 1.0
    j = report.to_json()
    assert j["top1_mean"].endswith("%")


def test_report_csv_and_svg():
    report = tiny_report()
    csv = report_to_csv(report)
    assert csv.splitlines()[0] == "split,k,accuracy"
    assert any(line.startswith("sp1,1,") for line in csv.splitlines())
    svg = report_to_svg(report)
    assert svg.count("<polyline") == 3  # two splits + mean
    assert "<polygon" in svg            # std band
    single = build_eval_report({"sp1": [pred("a")]},
                               {"sp1": [rec(0, "a")]},
                               GalleryManifest([ArtworkInstance("a", "planar")],
                                               ["background"], [], {}, {}),
                               k_max=3)
    svg1 = report_to_svg(single)
    assert svg1.count("<polyline") == 1
    assert "<polygon" not in svg1


def test_report_bit_identical_across_runs():
    r1, r2 = tiny_report(), tiny_report()
    assert r1.to_json() == r2.to_json()
    assert report_to_csv(r1) == report_to_csv(r2)
    assert report_to_svg(r1) == report_to_svg(r2)


def test_prediction_from_scores_argmax_first_tie():
    ls = LabelSpace(("a", "b", "c"))
    p = prediction_from_scores("f", np.array([0.2, 0.5, 0.5]), ls)
    assert p.label == "b"

import math

import numpy as np
import pytest

from awmi.diffops import DiffConfig
from awmi.invariants import DEFAULT_FEATURES, FeatureVector, InvariantId
from awmi.raster import (
    AffineParams,
    Raster,
    SyntheticSpec,
    generate_synthetic,
    save_pgm,
)
from awmi.retrieval import (
    BENCHMARK_CONFIG,
    PRCurve,
    RECALL_LEVELS,
    RetrievalRun,
    chi2_mod_distance,
    make_benchmark_dataset,
    run_retrieval,
    run_stability,
    signed_log,
    stability_error,
    stability_images,
)

CONFIG = DiffConfig(1.5, 5)


def _vec(values, defined=None):
    ids = DEFAULT_FEATURES[:len(values)]
    if defined is None:
        defined = [True] * len(values)
    return FeatureVector(ids, np.array(values, dtype=float),
                         np.array(defined, dtype=bool), CONFIG)


class TestStabilityError:
    def test_constant_values(self):
        assert stability_error([0.7, 0.7, 0.7]) == 0.0

    def test_simple_pair(self):
        assert stability_error([1.0, 3.0]) == pytest.approx(50.0)

    def test_published_row_example(self):
        vals = [2.58e-5, 2.53e-5, 2.42e-5, 2.50e-5, 2.54e-5, 2.57e-5]
        assert stability_error(vals) == pytest.approx(3.2, abs=0.1)

    def test_all_zero_flagged(self):
        assert math.isnan(stability_error([0.0, 0.0]))

    def test_positive_scaling_invariance(self, rng):
        vals = rng.normal(size=12)
        a = stability_error(vals)
        b = stability_error(vals * 7.25)
        assert b == pytest.approx(a, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            stability_error([])


class TestChi2Distance:
    def test_identity(self):
        v = _vec([1.0, -2.0, 3.0])
        assert chi2_mod_distance(v, v) == 0.0

    def test_one_vs_zero(self):
        assert chi2_mod_distance(_vec([1.0]), _vec([0.0])) == 1.0

    def test_sign_flip_with_zero_component(self):
        d = chi2_mod_distance(_vec([2.0, 0.0]), _vec([-2.0, 0.0]))
        assert d == pytest.approx(0.5)

    def test_symmetry_and_nonnegativity(self, rng):
        a = _vec(rng.normal(size=5))
        b = _vec(rng.normal(size=5))
        assert chi2_mod_distance(a, b) == chi2_mod_distance(b, a) >= 0.0

    def test_undefined_components_excluded(self):
        a = _vec([1.0, 5.0], defined=[True, False])
        b = _vec([1.0, -5.0], defined=[True, True])
        assert chi2_mod_distance(a, b) == 0.0

    def test_disjoint_defined_sets_infinite(self):
        a = _vec([1.0, 5.0], defined=[True, False])
        b = _vec([1.0, 5.0], defined=[False, True])
        assert chi2_mod_distance(a, b) == math.inf

    def test_mismatched_orderings_rejected(self):
        a = _vec([1.0])
        b = FeatureVector((InvariantId.AMI2,), np.array([1.0]),
                          np.array([True]), CONFIG)
        with pytest.raises(ValueError):
            chi2_mod_distance(a, b)


class TestSignedLog:
    def test_preserves_sign_and_zero(self):
        out = signed_log(np.array([-1e-3, 0.0, 1e-6]))
        assert out[0] < 0 and out[1] == 0.0 and out[2] > 0

    def test_monotone(self):
        vals = np.array([1e-9, 1e-6, 1e-3, 1.0])
        out = signed_log(vals)
        assert np.all(np.diff(out) > 0)


class TestRunStability:
    def test_identity_transforms_give_zero_error(self, smooth_raster):
        identity = AffineParams.identity()
        report = run_stability({"img": smooth_raster},
                               [identity, identity], CONFIG,
                               DEFAULT_FEATURES[:2])
        for row in report.rows:
            assert row.error_pct <= 1e-10

    def test_integer_translations_tiny_error(self):
        base = generate_synthetic(SyntheticSpec(
            "bumps", 160, 160, seed=4, center=(80.0, 80.0), radius=30.0))
        shifts = [AffineParams(1.0, 0.0, 0.0, 1.0, 11.0, 0.0),
                  AffineParams(1.0, 0.0, 0.0, 1.0, 0.0, -9.0),
                  AffineParams(1.0, 0.0, 0.0, 1.0, 6.0, 13.0)]
        report = run_stability({"img": base}, shifts, CONFIG)
        for row in report.rows:
            assert row.error_pct <= 0.1, row

    def test_clipping_recorded_as_warning(self):
        base = generate_synthetic(SyntheticSpec(
            "bumps", 96, 96, seed=1, center=(48.0, 48.0), radius=30.0))
        push_out = [AffineParams(1.0, 0.0, 0.0, 1.0, 70.0, 0.0)]
        report = run_stability({"img": base}, push_out, CONFIG)
        assert report.warnings

    def test_report_accessors(self, smooth_raster):
        report = run_stability({"a": smooth_raster},
                               [AffineParams.identity()], CONFIG,
                               DEFAULT_FEATURES[:2])
        assert set(report.errors_for("a")) == set(DEFAULT_FEATURES[:2])
        assert report.worst_error(DEFAULT_FEATURES[0]) >= 0.0
        with pytest.raises(KeyError):
            report.worst_error(InvariantId.AMI2)

    def test_builtin_images_shape(self):
        images = stability_images()
        assert len(images) == 5
        for r in images.values():
            assert r.pixels.shape == (512, 512)


class TestRetrievalRun:
    def _run(self):
        ranked = (("b", 0.1), ("c", 0.2), ("d", 0.3), ("e", 0.4))
        relevant = (True, False, True, False)
        return RetrievalRun("a", ranked, relevant)

    def test_precision_times_rank_is_integer(self):
        run = self._run()
        for r in range(1, 5):
            count = run.precision_at(r) * r
            assert count == pytest.approx(round(count), abs=1e-12)

    def test_recall_reaches_one_at_full_depth(self):
        run = self._run()
        assert run.recall_at(len(run.ranked)) == 1.0

    def test_interpolated_precision_monotone_levels(self):
        run = self._run()
        interp = run.interpolated_precision()
        assert len(interp) == len(RECALL_LEVELS)
        assert all(a >= b for a, b in zip(interp, interp[1:]))

    def test_rank_bounds_checked(self):
        run = self._run()
        with pytest.raises(ValueError):
            run.precision_at(0)
        with pytest.raises(ValueError):
            run.recall_at(9)


class TestRunRetrieval:
    def _noise_dataset(self, rng, classes=3, members=8, size=(10, 12)):
        dataset = {}
        for c in range(classes):
            dataset[f"c{c}"] = [
                (f"c{c}/i{k}",
                 Raster(rng.uniform(0.05, 1.0, size=size)))
                for k in range(members)]
        return dataset

    def test_duplicate_images_retrieve_perfectly(self, smooth_raster, rng):
        other = Raster(rng.uniform(0.05, 1.0, size=(96, 96)))
        dataset = {
            "a": [("a/1", smooth_raster), ("a/2", smooth_raster)],
            "b": [("b/1", other), ("b/2", other)],
        }
        result = run_retrieval(dataset, CONFIG)
        assert result.curve.precision_at_recall(1.0) == 1.0

    def test_noise_features_near_chance(self, rng):
        # class labels carry no signal, so precision sits near 1/C
        dataset = self._noise_dataset(rng, classes=3, members=8)
        result = run_retrieval(dataset, CONFIG)
        p = result.curve.precision_at_recall(0.5)
        chance = 1.0 / 3.0
        sigma = math.sqrt(chance * (1 - chance) / 24)
        assert abs(p - chance) <= 3 * sigma + 0.05

    def test_ranking_sorted_and_query_excluded(self, rng):
        dataset = self._noise_dataset(rng, classes=2, members=3)
        result = run_retrieval(dataset, CONFIG)
        for run in result.runs:
            dists = [d for _, d in run.ranked]
            assert dists == sorted(dists)
            assert run.query not in [i for i, _ in run.ranked]
            assert len(run.ranked) == 5
            assert run.recall_at(5) == 1.0

    def test_requires_two_classes_two_members(self, rng):
        with pytest.raises(ValueError):
            run_retrieval({"only": [("only/1", Raster(np.full((8, 8), 0.5)))]},
                          CONFIG)

    def test_directory_ingestion_and_skips(self, tmp_path, rng):
        for c in range(2):
            d = tmp_path / f"class{c}"
            d.mkdir()
            for k in range(2):
                save_pgm(Raster(rng.uniform(0.05, 1.0, size=(12, 12))),
                         d / f"img{k}.pgm")
        (tmp_path / "class0" / "broken.png").write_bytes(b"not an image")
        (tmp_path / "class0" / "ignored.txt").write_text("skip me")
        result = run_retrieval(tmp_path, CONFIG)
        assert result.skipped == 1
        assert len(result.runs) == 4

    def test_signed_log_option_runs(self, rng):
        dataset = self._noise_dataset(rng, classes=2, members=3)
        result = run_retrieval(dataset, CONFIG, use_signed_log=True)
        assert len(result.runs) == 6


class TestBenchmarkDataset:
    def test_shape_and_determinism(self):
        a = make_benchmark_dataset(classes=3, seed=1, size=96)
        b = make_benchmark_dataset(classes=3, seed=1, size=96)
        assert sorted(a) == [f"class{c:02d}" for c in range(3)]
        for cid in a:
            assert len(a[cid]) == 6
            for (ia, ra), (ib, rb) in zip(a[cid], b[cid]):
                assert ia == ib
                assert np.array_equal(ra.pixels, rb.pixels)

    def test_variants_stay_in_frame(self):
        ds = make_benchmark_dataset(classes=2, seed=0, size=96)
        for members in ds.values():
            base_mass = members[0][1].mass()
            for _, raster in members[1:]:
                assert raster.mass() > 0.1 * base_mass

    def test_rejects_single_class(self):
        with pytest.raises(ValueError):
            make_benchmark_dataset(classes=1)


class TestPRCurve:
    def test_unknown_level_rejected(self):
        curve = PRCurve(RECALL_LEVELS, tuple([1.0] * 11))
        with pytest.raises(KeyError):
            curve.precision_at_recall(0.55)

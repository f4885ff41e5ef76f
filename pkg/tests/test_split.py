import numpy as np
import pytest

from roofclass.dataset import stratified_split
from roofclass.dataset.samples import BuildingSample
from roofclass.errors import SplitError

TABLE_ROOF_TYPE_TOTALS = {"Gable": 3118, "Hip": 2044, "Flat": 1910, "NoRoof": 1273}
EXPECTED_SPLITS = {"Gable": (2339, 779), "Hip": (1534, 510), "Flat": (1433, 477), "NoRoof": (955, 318)}
TYPE_INDEX = {"Gable": 0, "Hip": 1, "Flat": 2, "NoRoof": 3}


def tiny_sample(bid, roof_type=None, roof_material=None, country="Dominica"):
    return BuildingSample(
        building_id=bid,
        rgb_patch=np.zeros((3, 1, 1), np.float32),
        lidar_patch=np.zeros((1, 1), np.float32),
        roof_type=roof_type,
        roof_material=roof_material,
        country_tag=country,
    )


def survey_scale_samples(countries=None):
    samples = []
    i = 0
    for name, total in TABLE_ROOF_TYPE_TOTALS.items():
        for j in range(total):
            country = "Dominica" if countries is None else countries(name, j)
            samples.append(tiny_sample(f"b{i:06d}", roof_type=TYPE_INDEX[name], country=country))
            i += 1
    return samples


class TestProportions:
    def test_survey_scale_counts_match_published_split(self):
        samples = survey_scale_samples()
        assignment = stratified_split(samples, "roof_type", train_frac=0.75, seed=0)
        for name, (train_exp, test_exp) in EXPECTED_SPLITS.items():
            got = assignment.class_counts[name]
            assert abs(got["train"] - train_exp) <= 1
            assert abs(got["test"] - test_exp) <= 1
            assert got["train"] + got["test"] == TABLE_ROOF_TYPE_TOTALS[name]

    def test_skewed_synthetic_proportions(self):
        sizes = {0: 400, 1: 300, 2: 200, 3: 100}
        samples = []
        i = 0
        for label, n in sizes.items():
            for _ in range(n):
                samples.append(tiny_sample(f"s{i:05d}", roof_type=label))
                i += 1
        assignment = stratified_split(samples, "roof_type", seed=3)
        for label, n in sizes.items():
            name = ["Gable", "Hip", "Flat", "NoRoof"][label]
            test_n = assignment.class_counts[name]["test"]
            assert abs(test_n - 0.25 * n) <= 1

    def test_all_train_when_frac_one(self):
        samples = [tiny_sample(f"x{i}", roof_type=i % 4) for i in range(40)]
        assignment = stratified_split(samples, "roof_type", train_frac=1.0)
        assert len(assignment.test_ids) == 0
        assert len(assignment.train_ids) == 40


class TestPartitionContract:
    def test_disjoint_and_exhaustive(self):
        samples = [tiny_sample(f"x{i}", roof_type=i % 4) for i in range(103)]
        assignment = stratified_split(samples, "roof_type", seed=11)
        ids = set(assignment.train_ids) | set(assignment.test_ids)
        assert len(ids) == 103
        assert not set(assignment.train_ids) & set(assignment.test_ids)

    def test_seed_reproducible(self):
        samples = [tiny_sample(f"x{i}", roof_type=i % 4) for i in range(80)]
        a = stratified_split(samples, "roof_type", seed=5)
        b = stratified_split(samples, "roof_type", seed=5)
        assert a.train_ids == b.train_ids and a.test_ids == b.test_ids
        c = stratified_split(samples, "roof_type", seed=6)
        assert a.test_ids != c.test_ids

    def test_input_order_invariance(self):
        samples = [tiny_sample(f"x{i}", roof_type=i % 4) for i in range(60)]
        a = stratified_split(samples, "roof_type", seed=2)
        b = stratified_split(list(reversed(samples)), "roof_type", seed=2)
        assert set(a.test_ids) == set(b.test_ids)

    def test_apply_tags_samples(self):
        samples = [tiny_sample(f"x{i}", roof_type=i % 4) for i in range(16)]
        assignment = stratified_split(samples, "roof_type", seed=1)
        assignment.apply(samples)
        tags = {s.split for s in samples}
        assert tags == {"train", "test"}


class TestRegionConstraint:
    def test_all_test_samples_from_region(self):
        def countries(name, j):
            return "Dominica" if j % 2 == 0 else "SaintLucia"

        samples = survey_scale_samples(countries)
        assignment = stratified_split(
            samples, "roof_type", seed=4, region_constraint="Dominica"
        )
        by_id = {s.building_id: s for s in samples}
        assert all(by_id[i].country_tag == "Dominica" for i in assignment.test_ids)
        assert len(assignment.test_ids) > 0

    def test_infeasible_quota_lists_classes(self):
        samples = [tiny_sample(f"a{i}", roof_type=0, country="SaintLucia") for i in range(40)]
        samples += [tiny_sample(f"b{i}", roof_type=1, country="Dominica") for i in range(40)]
        with pytest.raises(SplitError, match="Gable"):
            stratified_split(samples, "roof_type", region_constraint="Dominica")


class TestValidation:
    def test_unlabeled_sample_rejected(self):
        samples = [tiny_sample("x0", roof_type=0), tiny_sample("x1")]
        with pytest.raises(SplitError, match="not labeled"):
            stratified_split(samples, "roof_type")

    def test_bad_fraction_rejected(self):
        samples = [tiny_sample("x0", roof_type=0)]
        with pytest.raises(SplitError):
            stratified_split(samples, "roof_type", train_frac=0.0)
        with pytest.raises(SplitError):
            stratified_split(samples, "roof_type", train_frac=1.5)

    def test_material_task(self):
        samples = [tiny_sample(f"m{i}", roof_material=i % 5) for i in range(50)]
        assignment = stratified_split(samples, "roof_material", seed=0)
        assert len(assignment.class_counts) == 5

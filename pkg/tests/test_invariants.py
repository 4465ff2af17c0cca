import math

import numpy as np
import pytest

from awmi.diffops import DiffConfig, derivative_stack
from awmi.invariants import (
    AMI_FEATURES,
    DCORE_SPECS,
    DEFAULT_FEATURES,
    InvariantId,
    NORM_EXPONENT,
    ami2,
    ami7,
    awmi1,
    awmi1_numerator,
    awmi2,
    awmi2_direct,
    feature_vector,
)
from awmi.moments import DMTable, MomentTable, ZeroMassError
from awmi.raster import AffineParams, Raster, SyntheticSpec, generate_synthetic, warp_affine

CONFIG = DiffConfig(1.5, 5)


@pytest.fixture
def dms(small_random_raster):
    return DMTable(small_random_raster,
                   derivative_stack(small_random_raster, CONFIG))


class TestAMI2:
    def test_three_pixel_value(self):
        # unit masses at (0,0), (1,0), (0,1): numerator 2/3, mass 3
        img = np.zeros((2, 2))
        img[0, 0] = img[0, 1] = img[1, 0] = 1.0
        assert ami2(MomentTable(Raster(img))) == pytest.approx(2.0 / 243.0,
                                                               rel=1e-12)

    def test_collinear_masses_vanish(self):
        img = np.zeros((1, 3))
        img[0, 0] = img[0, 2] = 1.0
        assert ami2(MomentTable(Raster(img))) == pytest.approx(0.0, abs=1e-15)


class TestAMI7:
    def test_centrally_symmetric_raster_vanishes(self, rng):
        half = rng.uniform(0.1, 1.0, size=(5, 10))
        img = 0.5 * (half + half[::-1, ::-1])  # point symmetry about center
        value = ami7(MomentTable(Raster(img)))
        assert abs(value) < 1e-15

    def test_generic_raster_nonzero(self, small_random_raster):
        assert abs(ami7(MomentTable(small_random_raster))) > 1e-12


class TestAWMI1:
    def test_duplicate_rows_share_code_path(self, dms):
        # the third and sixth first-family invariants are the same formula
        a = awmi1(InvariantId.AWMI1_3, dms)
        b = awmi1(InvariantId.AWMI1_6, dms)
        assert a == b  # bit-for-bit

    def test_constant_raster_all_zero(self):
        r = Raster(np.full((24, 24), 0.6))
        stack = derivative_stack(r, CONFIG)
        dms = DMTable(r, stack)
        for iid in DEFAULT_FEATURES[:-1]:  # all first-family entries
            assert awmi1_numerator(iid, dms) == pytest.approx(0.0, abs=1e-12)

    def test_rejects_foreign_id(self, dms):
        with pytest.raises(ValueError):
            awmi1(InvariantId.AMI2, dms)

    def test_normalization_exponents(self):
        expected = {
            InvariantId.AMI2: 4, InvariantId.AMI7: 7,
            InvariantId.AWMI1_1: 4, InvariantId.AWMI1_2: 4,
            InvariantId.AWMI1_3: 5, InvariantId.AWMI1_4: 5,
            InvariantId.AWMI1_5: 6, InvariantId.AWMI1_6: 5,
            InvariantId.AWMI1_7: 6, InvariantId.AWMI1_8: 7,
        }
        assert {k: NORM_EXPONENT[k] for k in expected} == expected

    def test_exponents_match_dcore_structure(self):
        for iid, spec in DCORE_SPECS.items():
            assert NORM_EXPONENT[iid] == spec.core.n_points + spec.core.weight


class TestAWMI2:
    def test_matches_direct_field_ratio(self):
        for seed in range(4):
            r = generate_synthetic(SyntheticSpec("bumps", 96, 96, seed=seed))
            stack = derivative_stack(r, CONFIG)
            via_dms = awmi2(DMTable(r, stack))
            via_fields = awmi2_direct(r, stack)
            assert via_dms == pytest.approx(via_fields, rel=1e-10)

    def test_constant_raster_undefined(self):
        r = Raster(np.full((24, 24), 0.6))
        stack = derivative_stack(r, CONFIG)
        assert math.isnan(awmi2(DMTable(r, stack)))


class TestFeatureVector:
    def test_default_order(self, small_random_raster):
        vec = feature_vector(small_random_raster, config=CONFIG)
        assert vec.ids == DEFAULT_FEATURES
        assert len(vec.values) == 9

    def test_subset_matches_individual_calls(self, small_random_raster, dms):
        vec = feature_vector(small_random_raster, AMI_FEATURES, CONFIG)
        table = MomentTable(small_random_raster)
        assert vec.values[0] == ami2(table)
        assert vec.values[1] == ami7(table)

    def test_undefined_entries_flagged_not_zero(self):
        r = Raster(np.full((24, 24), 0.6))
        vec = feature_vector(r, config=CONFIG)
        flags = dict(zip(vec.ids, vec.defined))
        assert not flags[InvariantId.AWMI2]
        assert math.isnan(vec.as_dict()["AWMI2"])

    def test_identity_warp_reproduces_vector(self, smooth_raster):
        warped = warp_affine(smooth_raster, AffineParams.identity())
        a = feature_vector(smooth_raster, config=CONFIG)
        b = feature_vector(warped, config=CONFIG)
        assert np.allclose(a.values, b.values, rtol=1e-12)

    def test_zero_mass_raises(self):
        with pytest.raises(ZeroMassError):
            feature_vector(Raster(np.zeros((24, 24))), config=CONFIG)

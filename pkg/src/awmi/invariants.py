"""Closed-form moment invariants and the feature vector built from them.

Two classical affine moment invariants (AMI2, AMI7), eight first-order
affine weighted moment invariants (AWMI1_1..AWMI1_8), and one second-order
ratio invariant (AWMI2).

The AWMI1 numerators below are the full expansions of their defining
point-tuple products; every term table is certified against the
brute-force oracle (see :func:`awmi.oracle.verify_expansion`).  Known
divergences from the published table, found by that certification:

* AWMI1_2 is stated here at twice the published magnitude (the published
  row drops a common factor 2; invariance is unaffected).
* AWMI1_4 and AWMI1_7 contain subscript typos in print (one and three
  terms respectively); the corrected terms are used.
* The published AWMI1_6 row is a verbatim duplicate of AWMI1_3, and its
  nominal defining product expands to sums that all carry a first-order
  central moment, which is identically zero.  AWMI1_6 therefore shares
  AWMI1_3's formula and normalization (same code path, identical values).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .diffops import DerivativeStack, DiffConfig, adi_fields, derivative_stack
from .moments import DMKey, DMTable, MomentTable, ZeroMassError
from .oracle import CoreSpec, DCoreSpec
from .raster import Raster

#: Relative threshold below which a ratio denominator counts as zero.
DENOMINATOR_GUARD = 1e-12


class InvariantId(str, Enum):
    AMI2 = "AMI2"
    AMI7 = "AMI7"
    AWMI1_1 = "AWMI1_1"
    AWMI1_2 = "AWMI1_2"
    AWMI1_3 = "AWMI1_3"
    AWMI1_4 = "AWMI1_4"
    AWMI1_5 = "AWMI1_5"
    AWMI1_6 = "AWMI1_6"
    AWMI1_7 = "AWMI1_7"
    AWMI1_8 = "AWMI1_8"
    AWMI2 = "AWMI2"


#: Default feature-vector layout for the experiments.
DEFAULT_FEATURES: tuple[InvariantId, ...] = (
    InvariantId.AWMI1_1, InvariantId.AWMI1_2, InvariantId.AWMI1_3,
    InvariantId.AWMI1_4, InvariantId.AWMI1_5, InvariantId.AWMI1_6,
    InvariantId.AWMI1_7, InvariantId.AWMI1_8, InvariantId.AWMI2,
)

AMI_FEATURES: tuple[InvariantId, ...] = (InvariantId.AMI2, InvariantId.AMI7)


# AWMI1 numerators as sums of coefficient * product of first-order DMs;
# each DM is keyed (p, q, m, n).
TABLE_AWMI1: dict[InvariantId, tuple] = {
    InvariantId.AWMI1_1: (
        (1, ((0, 2, 0, 0), (2, 1, 0, 1))),
        (1, ((0, 2, 0, 0), (3, 0, 1, 0))),
        (1, ((0, 3, 0, 1), (2, 0, 0, 0))),
        (-2, ((1, 1, 0, 0), (1, 2, 0, 1))),
        (-2, ((1, 1, 0, 0), (2, 1, 1, 0))),
        (1, ((1, 2, 1, 0), (2, 0, 0, 0))),
    ),
    InvariantId.AWMI1_2: (
        (2, ((0, 3, 0, 1), (2, 1, 0, 1))),
        (2, ((0, 3, 0, 1), (3, 0, 1, 0))),
        (-2, ((1, 2, 0, 1), (1, 2, 0, 1))),
        (-4, ((1, 2, 0, 1), (2, 1, 1, 0))),
        (2, ((1, 2, 1, 0), (2, 1, 0, 1))),
        (2, ((1, 2, 1, 0), (3, 0, 1, 0))),
        (-2, ((2, 1, 1, 0), (2, 1, 1, 0))),
    ),
    InvariantId.AWMI1_3: (
        (1, ((0, 2, 0, 0), (1, 1, 0, 1), (1, 1, 0, 1))),
        (2, ((0, 2, 0, 0), (1, 1, 0, 1), (2, 0, 1, 0))),
        (1, ((0, 2, 0, 0), (2, 0, 1, 0), (2, 0, 1, 0))),
        (1, ((0, 2, 0, 1), (0, 2, 0, 1), (2, 0, 0, 0))),
        (-2, ((0, 2, 0, 1), (1, 1, 0, 0), (1, 1, 0, 1))),
        (-2, ((0, 2, 0, 1), (1, 1, 0, 0), (2, 0, 1, 0))),
        (2, ((0, 2, 0, 1), (1, 1, 1, 0), (2, 0, 0, 0))),
        (-2, ((1, 1, 0, 0), (1, 1, 0, 1), (1, 1, 1, 0))),
        (-2, ((1, 1, 0, 0), (1, 1, 1, 0), (2, 0, 1, 0))),
        (1, ((1, 1, 1, 0), (1, 1, 1, 0), (2, 0, 0, 0))),
    ),
    InvariantId.AWMI1_4: (
        (1, ((0, 2, 0, 1), (0, 2, 0, 1), (2, 1, 0, 1))),
        (1, ((0, 2, 0, 1), (0, 2, 0, 1), (3, 0, 1, 0))),
        (-2, ((0, 2, 0, 1), (1, 1, 0, 1), (1, 2, 0, 1))),
        (-2, ((0, 2, 0, 1), (1, 1, 0, 1), (2, 1, 1, 0))),
        (2, ((0, 2, 0, 1), (1, 1, 1, 0), (2, 1, 0, 1))),
        (2, ((0, 2, 0, 1), (1, 1, 1, 0), (3, 0, 1, 0))),
        (-2, ((0, 2, 0, 1), (1, 2, 0, 1), (2, 0, 1, 0))),
        (-2, ((0, 2, 0, 1), (2, 0, 1, 0), (2, 1, 1, 0))),
        (1, ((0, 3, 0, 1), (1, 1, 0, 1), (1, 1, 0, 1))),
        (2, ((0, 3, 0, 1), (1, 1, 0, 1), (2, 0, 1, 0))),
        (1, ((0, 3, 0, 1), (2, 0, 1, 0), (2, 0, 1, 0))),
        (1, ((1, 1, 0, 1), (1, 1, 0, 1), (1, 2, 1, 0))),
        (-2, ((1, 1, 0, 1), (1, 1, 1, 0), (1, 2, 0, 1))),
        (-2, ((1, 1, 0, 1), (1, 1, 1, 0), (2, 1, 1, 0))),
        (2, ((1, 1, 0, 1), (1, 2, 1, 0), (2, 0, 1, 0))),
        (1, ((1, 1, 1, 0), (1, 1, 1, 0), (2, 1, 0, 1))),
        (1, ((1, 1, 1, 0), (1, 1, 1, 0), (3, 0, 1, 0))),
        (-2, ((1, 1, 1, 0), (1, 2, 0, 1), (2, 0, 1, 0))),
        (-2, ((1, 1, 1, 0), (2, 0, 1, 0), (2, 1, 1, 0))),
        (1, ((1, 2, 1, 0), (2, 0, 1, 0), (2, 0, 1, 0))),
    ),
    InvariantId.AWMI1_5: (
        (1, ((0, 2, 0, 0), (0, 2, 0, 1), (3, 0, 0, 0))),
        (-1, ((0, 2, 0, 0), (1, 1, 0, 1), (2, 1, 0, 0))),
        (1, ((0, 2, 0, 0), (1, 1, 1, 0), (3, 0, 0, 0))),
        (-1, ((0, 2, 0, 0), (2, 0, 1, 0), (2, 1, 0, 0))),
        (-2, ((0, 2, 0, 1), (1, 1, 0, 0), (2, 1, 0, 0))),
        (1, ((0, 2, 0, 1), (1, 2, 0, 0), (2, 0, 0, 0))),
        (-1, ((0, 3, 0, 0), (1, 1, 0, 1), (2, 0, 0, 0))),
        (-1, ((0, 3, 0, 0), (2, 0, 0, 0), (2, 0, 1, 0))),
        (2, ((1, 1, 0, 0), (1, 1, 0, 1), (1, 2, 0, 0))),
        (-2, ((1, 1, 0, 0), (1, 1, 1, 0), (2, 1, 0, 0))),
        (2, ((1, 1, 0, 0), (1, 2, 0, 0), (2, 0, 1, 0))),
        (1, ((1, 1, 1, 0), (1, 2, 0, 0), (2, 0, 0, 0))),
    ),
    InvariantId.AWMI1_7: (
        (1, ((0, 2, 0, 1), (0, 3, 0, 1), (3, 0, 0, 0))),
        (1, ((0, 2, 0, 1), (1, 2, 0, 0), (2, 1, 0, 1))),
        (1, ((0, 2, 0, 1), (1, 2, 0, 0), (3, 0, 1, 0))),
        (-2, ((0, 2, 0, 1), (1, 2, 0, 1), (2, 1, 0, 0))),
        (1, ((0, 2, 0, 1), (1, 2, 1, 0), (3, 0, 0, 0))),
        (-2, ((0, 2, 0, 1), (2, 1, 0, 0), (2, 1, 1, 0))),
        (-1, ((0, 3, 0, 0), (1, 1, 0, 1), (2, 1, 0, 1))),
        (-1, ((0, 3, 0, 0), (1, 1, 0, 1), (3, 0, 1, 0))),
        (-1, ((0, 3, 0, 0), (2, 0, 1, 0), (2, 1, 0, 1))),
        (-1, ((0, 3, 0, 0), (2, 0, 1, 0), (3, 0, 1, 0))),
        (-1, ((0, 3, 0, 1), (1, 1, 0, 1), (2, 1, 0, 0))),
        (1, ((0, 3, 0, 1), (1, 1, 1, 0), (3, 0, 0, 0))),
        (-1, ((0, 3, 0, 1), (2, 0, 1, 0), (2, 1, 0, 0))),
        (2, ((1, 1, 0, 1), (1, 2, 0, 0), (1, 2, 0, 1))),
        (2, ((1, 1, 0, 1), (1, 2, 0, 0), (2, 1, 1, 0))),
        (-1, ((1, 1, 0, 1), (1, 2, 1, 0), (2, 1, 0, 0))),
        (1, ((1, 1, 1, 0), (1, 2, 0, 0), (2, 1, 0, 1))),
        (1, ((1, 1, 1, 0), (1, 2, 0, 0), (3, 0, 1, 0))),
        (-2, ((1, 1, 1, 0), (1, 2, 0, 1), (2, 1, 0, 0))),
        (1, ((1, 1, 1, 0), (1, 2, 1, 0), (3, 0, 0, 0))),
        (-2, ((1, 1, 1, 0), (2, 1, 0, 0), (2, 1, 1, 0))),
        (2, ((1, 2, 0, 0), (1, 2, 0, 1), (2, 0, 1, 0))),
        (2, ((1, 2, 0, 0), (2, 0, 1, 0), (2, 1, 1, 0))),
        (-1, ((1, 2, 1, 0), (2, 0, 1, 0), (2, 1, 0, 0))),
    ),
    InvariantId.AWMI1_8: (
        (-2, ((0, 3, 0, 0), (1, 2, 0, 1), (3, 0, 0, 0))),
        (2, ((0, 3, 0, 0), (2, 1, 0, 0), (2, 1, 0, 1))),
        (2, ((0, 3, 0, 0), (2, 1, 0, 0), (3, 0, 1, 0))),
        (-2, ((0, 3, 0, 0), (2, 1, 1, 0), (3, 0, 0, 0))),
        (2, ((0, 3, 0, 1), (1, 2, 0, 0), (3, 0, 0, 0))),
        (-2, ((0, 3, 0, 1), (2, 1, 0, 0), (2, 1, 0, 0))),
        (-2, ((1, 2, 0, 0), (1, 2, 0, 0), (2, 1, 0, 1))),
        (-2, ((1, 2, 0, 0), (1, 2, 0, 0), (3, 0, 1, 0))),
        (2, ((1, 2, 0, 0), (1, 2, 0, 1), (2, 1, 0, 0))),
        (2, ((1, 2, 0, 0), (1, 2, 1, 0), (3, 0, 0, 0))),
        (2, ((1, 2, 0, 0), (2, 1, 0, 0), (2, 1, 1, 0))),
        (-2, ((1, 2, 1, 0), (2, 1, 0, 0), (2, 1, 0, 0))),
    ),
}
TABLE_AWMI1[InvariantId.AWMI1_6] = TABLE_AWMI1[InvariantId.AWMI1_3]


def _dcore(primitives, k) -> DCoreSpec:
    return DCoreSpec(CoreSpec(len(k), tuple(primitives)), tuple(k))


#: Defining point-tuple product for each invariant numerator (oracle side).
DCORE_SPECS: dict[InvariantId, DCoreSpec] = {
    InvariantId.AMI2: _dcore([(1, 2), (1, 2)], (0, 0)),
    InvariantId.AMI7: _dcore([(1, 2), (1, 3), (2, 3), (2, 3)], (0, 0, 0)),
    InvariantId.AWMI1_1: _dcore([(1, 2), (1, 2)], (1, 0)),
    InvariantId.AWMI1_2: _dcore([(1, 2), (1, 2)], (1, 1)),
    InvariantId.AWMI1_3: _dcore([(1, 2), (1, 3)], (0, 1, 1)),
    InvariantId.AWMI1_4: _dcore([(1, 2), (1, 3)], (1, 1, 1)),
    InvariantId.AWMI1_5: _dcore([(1, 2), (1, 3), (1, 3)], (0, 1, 0)),
    # the nominal sixth product is degenerate; see module docstring
    InvariantId.AWMI1_6: _dcore([(1, 2), (1, 3)], (0, 1, 1)),
    InvariantId.AWMI1_7: _dcore([(1, 2), (1, 3), (1, 3)], (0, 1, 1)),
    InvariantId.AWMI1_8: _dcore([(1, 2), (1, 3), (2, 3), (2, 3)], (1, 0, 0)),
}

#: Core products whose integrals vanish identically (antisymmetry).
ZERO_CORES: dict[str, CoreSpec] = {
    "AMI1": CoreSpec(2, ((1, 2),)),
    "AMI3": CoreSpec(2, ((1, 2), (1, 2), (1, 2))),
    "AMI6": CoreSpec(3, ((1, 2), (1, 3), (2, 3))),
}

#: Power of the image mass dividing each numerator (points + determinant
#: factors of the defining product).
NORM_EXPONENT: dict[InvariantId, int] = {
    iid: spec.core.n_points + spec.core.weight for iid, spec in DCORE_SPECS.items()
}


def ami2(moments: MomentTable) -> float:
    num = 2.0 * moments.u(2, 0) * moments.u(0, 2) - 2.0 * moments.u(1, 1) ** 2
    return num / moments.m00 ** NORM_EXPONENT[InvariantId.AMI2]


def ami7(moments: MomentTable) -> float:
    u = moments.u
    num = 2.0 * (
        u(0, 2) * u(1, 2) * u(3, 0)
        - u(0, 2) * u(2, 1) ** 2
        - u(0, 3) * u(1, 1) * u(3, 0)
        + u(0, 3) * u(2, 0) * u(2, 1)
        + u(1, 1) * u(1, 2) * u(2, 1)
        - u(1, 2) ** 2 * u(2, 0)
    )
    return num / moments.m00 ** NORM_EXPONENT[InvariantId.AMI7]


def _ami_numerator(invariant_id: InvariantId, moments: MomentTable) -> float:
    if invariant_id is InvariantId.AMI2:
        return ami2(moments) * moments.m00 ** NORM_EXPONENT[invariant_id]
    return ami7(moments) * moments.m00 ** NORM_EXPONENT[invariant_id]


def awmi1_numerator(invariant_id: InvariantId, dms: DMTable) -> float:
    terms = TABLE_AWMI1[InvariantId(invariant_id)]
    total = 0.0
    for coeff, keys in terms:
        prod = float(coeff)
        for p, q, m, n in keys:
            prod *= dms.value(DMKey(p, q, m, n))
        total += prod
    return total


def awmi1(invariant_id: InvariantId, dms: DMTable) -> float:
    invariant_id = InvariantId(invariant_id)
    if invariant_id not in TABLE_AWMI1:
        raise ValueError(f"{invariant_id} is not a first-order weighted invariant")
    return awmi1_numerator(invariant_id, dms) / dms.m00 ** NORM_EXPONENT[invariant_id]


def awmi2(dms: DMTable) -> float:
    """Ratio of the two second-order pure differential integrals.

    Numerator: integral of (fxx*fyy - fxy^2) * f.
    Denominator: integral of (fy^2*fxx - 2*fx*fy*fxy + fx^2*fyy) * f.
    Returns NaN when the denominator is negligible relative to the image
    derivative scale (flagged as undefined at the vector level).
    """
    num = dms.value(DMKey(0, 0, 0, 0, 1, 1, 0)) - dms.value(DMKey(0, 0, 0, 0, 0, 0, 2))
    den = (dms.value(DMKey(0, 0, 0, 2, 1, 0, 0))
           - 2.0 * dms.value(DMKey(0, 0, 1, 1, 0, 0, 1))
           + dms.value(DMKey(0, 0, 2, 0, 0, 1, 0)))
    scale = max(abs(num), abs(den))
    if abs(den) <= DENOMINATOR_GUARD * max(scale, dms.m00):
        return float("nan")
    return num / den


def awmi2_direct(raster: Raster, stack: DerivativeStack) -> float:
    """Same ratio evaluated through the pointwise invariant fields; an
    independent arithmetic path used for cross-checking."""
    from .moments import centroid

    fields = adi_fields(stack, centroid(raster))
    num = float(np.sum(fields.adi4 * raster.pixels))
    den = float(np.sum(fields.adi5 * raster.pixels))
    if abs(den) <= DENOMINATOR_GUARD * max(abs(num), abs(den), raster.mass()):
        return float("nan")
    return num / den


def numerator(invariant_id: InvariantId, raster: Raster, stack: DerivativeStack) -> float:
    """Unnormalized closed-form numerator, for oracle comparison."""
    invariant_id = InvariantId(invariant_id)
    if invariant_id in (InvariantId.AMI2, InvariantId.AMI7):
        return _ami_numerator(invariant_id, MomentTable(raster))
    if invariant_id is InvariantId.AWMI2:
        raise ValueError("AWMI2 is a self-normalizing ratio with no tuple-product form")
    return awmi1_numerator(invariant_id, DMTable(raster, stack))


@dataclass(frozen=True)
class FeatureVector:
    """Named invariant values for one image.

    ``defined`` flags entries whose value exists; undefined entries hold
    NaN and are never silently zero.
    """

    ids: tuple[InvariantId, ...]
    values: np.ndarray
    defined: np.ndarray
    config: DiffConfig

    def __post_init__(self):
        if len(self.ids) != len(self.values) or len(self.ids) != len(self.defined):
            raise ValueError("ids, values and defined flags must align")

    def as_dict(self) -> dict[str, float]:
        return {iid.value: float(v) for iid, v in zip(self.ids, self.values)}


def feature_vector(raster: Raster,
                   ids: tuple[InvariantId, ...] = DEFAULT_FEATURES,
                   config: DiffConfig = DiffConfig()) -> FeatureVector:
    """Evaluate the configured invariants, sharing one derivative stack
    and one moment/DM table across all entries."""
    ids = tuple(InvariantId(i) for i in ids)
    if raster.mass() <= 0.0:
        raise ZeroMassError("feature vector requires positive image mass")

    needs_stack = any(i not in (InvariantId.AMI2, InvariantId.AMI7) for i in ids)
    mtable = MomentTable(raster)
    dms = DMTable(raster, derivative_stack(raster, config)) if needs_stack else None

    values = np.empty(len(ids))
    for idx, iid in enumerate(ids):
        if iid is InvariantId.AMI2:
            values[idx] = ami2(mtable)
        elif iid is InvariantId.AMI7:
            values[idx] = ami7(mtable)
        elif iid is InvariantId.AWMI2:
            values[idx] = awmi2(dms)
        else:
            values[idx] = awmi1(iid, dms)
    defined = np.isfinite(values)
    return FeatureVector(ids=ids, values=values, defined=defined, config=config)

"""Brute-force verification engine.

Evaluates Core/DCore invariant numerators as literal multiple sums over
pixel tuples, with no reference to the closed-form moment expansions.
This is the ground-truth path that certifies every hand-entered formula
in :mod:`awmi.invariants`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffops import DerivativeStack
from .moments import ZeroMassError, centroid
from .raster import Raster

TUPLE_BUDGET = 10 ** 8


class TupleBudgetError(RuntimeError):
    """Raised when a brute-force sum would enumerate too many tuples."""


@dataclass(frozen=True)
class CoreSpec:
    """Product of centered 2x2 determinants over ``n_points`` image points.

    ``primitives`` lists the determinant factors as 1-based, ordered point
    index pairs (i, j), i < j; repeats express powers.
    """

    n_points: int
    primitives: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("need at least one point")
        for i, j in self.primitives:
            if not (1 <= i < j <= self.n_points):
                raise ValueError(f"bad primitive ({i}, {j}) for N={self.n_points}")

    @property
    def weight(self) -> int:
        """Number of determinant factors (the m of the N+m normalization)."""
        return len(self.primitives)

    def degrees(self) -> tuple[int, ...]:
        d = [0] * self.n_points
        for i, j in self.primitives:
            d[i - 1] += 1
            d[j - 1] += 1
        return tuple(d)


@dataclass(frozen=True)
class DCoreSpec:
    """A CoreSpec with per-point exponents of the radial-gradient invariant
    x*fx + y*fy multiplied in."""

    core: CoreSpec
    k: tuple[int, ...]

    def __post_init__(self):
        if len(self.k) != self.core.n_points:
            raise ValueError("one exponent per point required")
        if min(self.k) < 0:
            raise ValueError("exponents must be nonnegative")


def _active_pixels(raster: Raster):
    """Centered coordinates and values of pixels with nonzero intensity.

    Skipping zero pixels is exact: the intensity multiplies every tuple
    slot, so tuples touching a zero pixel contribute nothing.
    """
    xbar, ybar = centroid(raster)
    xs, ys = raster.coords()
    mask = raster.pixels > 0.0
    return (xs[mask] - xbar, ys[mask] - ybar, raster.pixels[mask], mask)


def _check_budget(n_active: int, n_points: int) -> None:
    if n_active ** n_points > TUPLE_BUDGET:
        raise TupleBudgetError(
            f"{n_active}^{n_points} tuples exceed the budget of {TUPLE_BUDGET}")


def _tuple_sum(xc, yc, slot_weights, spec: CoreSpec) -> float:
    """Sum the primitive product times per-slot weights over all tuples.

    The sum is organized as one dense N-axis array built by broadcasting,
    which fixes the accumulation structure and keeps results deterministic.
    """
    n = spec.n_points
    s_mat = np.multiply.outer(xc, yc) - np.multiply.outer(yc, xc)
    p = len(xc)

    total = np.ones((1,) * n)
    for i, j in spec.primitives:
        # i < j, so the first matrix axis maps to the earlier tuple slot
        shape = [1] * n
        shape[i - 1] = p
        shape[j - 1] = p
        total = total * s_mat.reshape(shape)
    for slot, w in enumerate(slot_weights):
        shape = [1] * n
        shape[slot] = p
        total = total * w.reshape(shape)
    return float(total.sum())


def eval_core(raster: Raster, spec: CoreSpec) -> float:
    """Literal N-fold sum of the primitive product weighted by intensities."""
    xc, yc, f, _ = _active_pixels(raster)
    _check_budget(len(xc), spec.n_points)
    return _tuple_sum(xc, yc, [f] * spec.n_points, spec)


def eval_core_magnitude(raster: Raster, spec: CoreSpec) -> float:
    """Same N-fold sum as :func:`eval_core` but over absolute term values.

    Gives the natural scale against which a vanishing core sum should be
    judged: the cancellation is perfect only relative to how large the
    individual tuple terms are.
    """
    xc, yc, f, _ = _active_pixels(raster)
    _check_budget(len(xc), spec.n_points)
    return _tuple_sum_abs(xc, yc, [f] * spec.n_points, spec)


def _tuple_sum_abs(xc, yc, slot_weights, spec: CoreSpec) -> float:
    n = spec.n_points
    s_mat = np.abs(np.multiply.outer(xc, yc) - np.multiply.outer(yc, xc))
    p = len(xc)
    total = np.ones((1,) * n)
    for i, j in spec.primitives:
        shape = [1] * n
        shape[i - 1] = p
        shape[j - 1] = p
        total = total * s_mat.reshape(shape)
    for slot, w in enumerate(slot_weights):
        shape = [1] * n
        shape[slot] = p
        total = total * np.abs(w).reshape(shape)
    return float(total.sum())


def eval_dcore(raster: Raster, stack: DerivativeStack, spec: DCoreSpec) -> float:
    """Literal N-fold sum including the per-point radial-gradient factors."""
    if stack.shape != raster.pixels.shape:
        raise ValueError("derivative stack does not match raster dimensions")
    xc, yc, f, mask = _active_pixels(raster)
    _check_budget(len(xc), spec.core.n_points)
    radial = xc * stack.fx[mask] + yc * stack.fy[mask]
    weights = [f * radial ** k if k else f for k in spec.k]
    return _tuple_sum(xc, yc, weights, spec.core)


@dataclass
class VerificationReport:
    """Outcome of comparing a closed form against the brute-force sum."""

    invariant: str
    trials: int
    seed: int
    tolerance: float
    max_rel_deviation: float
    deviations: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_deviation <= self.tolerance


def random_test_raster(rng: np.random.Generator, width: int = 12, height: int = 10) -> Raster:
    """Small random raster with strictly positive pixels (all active)."""
    return Raster(rng.uniform(0.05, 1.0, size=(height, width)))


def verify_expansion(invariant_id, trials: int = 10, seed: int = 0,
                     width: int = 12, height: int = 10) -> VerificationReport:
    """Run random small rasters through the closed-form numerator and the
    brute-force sum; report the maximum relative deviation.

    Deterministic for a given seed.  Tolerances: 1e-9 for two-point
    invariants, 1e-6 for three-point ones (longer cancellation chains).
    """
    from . import invariants  # deferred: invariants imports this module

    from .diffops import DiffConfig, derivative_stack

    invariant_id = invariants.InvariantId(invariant_id)
    spec = invariants.DCORE_SPECS[invariant_id]
    tol = 1e-9 if spec.core.n_points <= 2 else 1e-6

    rng = np.random.default_rng(seed)
    config = DiffConfig(sigma=1.5, kernel_size=5)
    deviations = []
    for _ in range(trials):
        raster = random_test_raster(rng, width, height)
        stack = derivative_stack(raster, config)
        closed = invariants.numerator(invariant_id, raster, stack)
        brute = eval_dcore(raster, stack, spec)
        scale = max(abs(closed), abs(brute), 1e-300)
        deviations.append(abs(closed - brute) / scale)
    return VerificationReport(
        invariant=invariant_id.value,
        trials=trials,
        seed=seed,
        tolerance=tol,
        max_rel_deviation=max(deviations),
        deviations=deviations,
    )


def verify_zero_core(name: str, trials: int = 10, seed: int = 0,
                     width: int = 12, height: int = 10) -> VerificationReport:
    """Check that a structurally-vanishing core sums to zero.

    ``name`` is one of the identically-zero invariants (AMI1, AMI3,
    AMI6); the brute-force sum of its core is compared against zero,
    measured relative to the sum of absolute term magnitudes.
    """
    from . import invariants  # deferred: invariants imports this module

    try:
        spec = invariants.ZERO_CORES[name]
    except KeyError:
        raise ValueError(f"{name!r} is not one of the vanishing cores "
                         f"{sorted(invariants.ZERO_CORES)}") from None
    rng = np.random.default_rng(seed)
    deviations = []
    for _ in range(trials):
        raster = random_test_raster(rng, width, height)
        value = eval_core(raster, spec)
        magnitude = eval_core_magnitude(raster, spec)
        deviations.append(abs(value) / max(magnitude, 1e-300))
    return VerificationReport(
        invariant=name,
        trials=trials,
        seed=seed,
        tolerance=1e-9,
        max_rel_deviation=max(deviations),
        deviations=deviations,
    )

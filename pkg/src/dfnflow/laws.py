"""Adaptive velocity-pressure laws and the associated dissipation potential.

A law pair consists of a low-speed branch and a high-speed branch, each of the
form coefficient(speed) * velocity, selected by a threshold speed. Internally
all speeds are divided by the threshold, so branch evaluation happens in
normalized variables where the regime switch sits at speed 1; law parameters
are supplied in physical units and rescaled once at construction.

The piecewise potential glues the antiderivatives of the two branch
coefficients, normalized to vanish at the switch. Its convexity is decided by
the sign of the coefficient jump at the switch, which the probe in this module
checks empirically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np


class Regime(enum.IntEnum):
    LOW = 0
    HIGH = 1


class JumpSign(enum.Enum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


@dataclass(frozen=True)
class ConstantLaw:
    """Speed-independent coefficient (Darcy): phi(a) = value."""

    value: float

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError(f"constant law coefficient must be positive, got {self.value}")

    def phi(self, a):
        return np.full_like(np.asarray(a, dtype=float), self.value)

    def potential(self, a):
        """Antiderivative of phi/2 in squared speed, vanishing at a = 1."""
        return self.value * (np.asarray(a, dtype=float) - 1.0) / 2.0

    def potential_coefficients(self) -> tuple[float, float, float]:
        """(c0, c1, c15) with potential(a) = c0 + c1*a + c15*a**1.5."""
        return (-self.value / 2.0, self.value / 2.0, 0.0)


@dataclass(frozen=True)
class AffineSpeedLaw:
    """Coefficient affine in speed (Darcy-Forchheimer): phi(a) = b0 + b1*sqrt(a)."""

    intercept: float
    slope: float

    def __post_init__(self):
        if self.intercept < 0 or self.slope < 0 or self.intercept + self.slope <= 0:
            raise ValueError(
                "affine law needs intercept >= 0, slope >= 0 and a positive sum; "
                f"got ({self.intercept}, {self.slope})"
            )

    def phi(self, a):
        return self.intercept + self.slope * np.sqrt(np.asarray(a, dtype=float))

    def potential(self, a):
        a = np.asarray(a, dtype=float)
        return self.intercept * (a - 1.0) / 2.0 + self.slope * (a**1.5 - 1.0) / 3.0

    def potential_coefficients(self) -> tuple[float, float, float]:
        return (
            -self.intercept / 2.0 - self.slope / 3.0,
            self.intercept / 2.0,
            self.slope / 3.0,
        )


@dataclass(frozen=True)
class CustomLaw:
    """Extension hook for an arbitrary coefficient of normalized squared speed.

    The caller must supply the matching antiderivative of phi/2 vanishing at
    a = 1; closed forms are refused silent quadrature here on purpose. Custom
    branches are used as given, without threshold rescaling.
    """

    phi_fn: Callable[[np.ndarray], np.ndarray]
    potential_fn: Callable[[np.ndarray], np.ndarray]
    growth_exponent: float = 2.0

    def phi(self, a):
        return self.phi_fn(np.asarray(a, dtype=float))

    def potential(self, a):
        return self.potential_fn(np.asarray(a, dtype=float))

    def potential_coefficients(self):
        return None


LawBranch = Union[ConstantLaw, AffineSpeedLaw, CustomLaw]


def _normalize(branch: LawBranch, threshold: float) -> LawBranch:
    if isinstance(branch, AffineSpeedLaw):
        return AffineSpeedLaw(branch.intercept, branch.slope * threshold)
    return branch


@dataclass(frozen=True)
class AdaptiveLaw:
    """Low/high law pair with a switching threshold on the speed magnitude.

    ``low`` and ``high`` are given in physical units; derived attributes are
    evaluated after normalizing speeds by the threshold, so ``lambda1`` and
    ``lambda2`` are the two coefficients exactly at the switch.
    """

    low: LawBranch
    high: LawBranch
    threshold: float = 1.0

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError(f"threshold speed must be positive, got {self.threshold}")
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ValueError("law coefficients at the threshold must be positive")

    @property
    def low_normalized(self) -> LawBranch:
        return _normalize(self.low, self.threshold)

    @property
    def high_normalized(self) -> LawBranch:
        return _normalize(self.high, self.threshold)

    @property
    def lambda1(self) -> float:
        return float(self.low_normalized.phi(1.0))

    @property
    def lambda2(self) -> float:
        return float(self.high_normalized.phi(1.0))

    @property
    def growth_exponent(self) -> float:
        """Growth rate r of the high branch: 2 for constant, 3 for affine."""
        high = self.high
        if isinstance(high, ConstantLaw):
            return 2.0
        if isinstance(high, AffineSpeedLaw):
            return 3.0
        return high.growth_exponent

    @property
    def conjugate_exponent(self) -> float:
        r = self.growth_exponent
        return r / (r - 1.0)

    def branch_for(self, regime: Regime) -> LawBranch:
        return self.low_normalized if regime == Regime.LOW else self.high_normalized


def eval_lambda_coefficient(law: AdaptiveLaw, speed: float, regime: Regime) -> float:
    """Coefficient multiplying the velocity at the given speed and regime.

    The regime is an explicit input: the caller (normally the interface
    tracker) owns regime assignment, and in particular a speed above the
    threshold may be evaluated on the low branch while a configuration is
    being iterated.
    """
    if speed < 0:
        raise ValueError(f"speed must be nonnegative, got {speed}")
    a = (speed / law.threshold) ** 2
    return float(law.branch_for(regime).phi(a))


@dataclass(frozen=True)
class PsiPotential:
    """Piecewise dissipation potential in normalized squared speed.

    ``value(a)`` uses the low branch potential for a <= 1 and the high branch
    for a > 1; both vanish at a = 1 so the potential is continuous at the
    switch. ``value_physical`` rescales to physical squared speeds, which is
    the form entering the energy functional of the flow problem.
    """

    low: LawBranch
    high: LawBranch
    threshold: float = 1.0

    def value(self, a):
        a = np.asarray(a, dtype=float)
        return np.where(a <= 1.0, self.low.potential(a), self.high.potential(a))

    def phi(self, a):
        a = np.asarray(a, dtype=float)
        return np.where(a <= 1.0, self.low.phi(a), self.high.phi(a))

    def value_physical(self, a_phys):
        """Potential of the physical squared speed, scaled by threshold**2."""
        u2 = self.threshold**2
        return u2 * self.value(np.asarray(a_phys, dtype=float) / u2)

    @property
    def has_closed_form(self) -> bool:
        return (
            self.low.potential_coefficients() is not None
            and self.high.potential_coefficients() is not None
        )

    def flux_antiderivative(self, w):
        """G(w) = integral from 0 to w of value_physical(s**2) ds, closed form.

        Odd in w. Exact antiderivatives exist for the constant and affine
        branch kinds; custom branches raise.
        """
        if not self.has_closed_form:
            raise ValueError("custom law branches carry no closed-form antiderivative")
        ubar = self.threshold
        w = np.asarray(w, dtype=float)
        s = np.sign(w)
        x = np.abs(w)

        def poly(coeffs, x):
            c0, c1, c15 = coeffs
            return ubar**2 * c0 * x + c1 * x**3 / 3.0 + c15 * x**4 / (4.0 * ubar)

        lo = self.low.potential_coefficients()
        hi = self.high.potential_coefficients()
        inner = poly(lo, np.minimum(x, ubar))
        outer = poly(hi, np.maximum(x, ubar)) - poly(hi, ubar)
        return s * (inner + outer)


def build_psi(law: AdaptiveLaw) -> PsiPotential:
    """Dissipation potential of an adaptive law, in normalized variables."""
    return PsiPotential(
        low=law.low_normalized, high=law.high_normalized, threshold=law.threshold
    )


def jump_sign(law: AdaptiveLaw) -> JumpSign:
    """Sign of the coefficient jump lambda2 - lambda1 at the switch.

    Zero is detected only for bit-identical coefficients; the jump sign
    decides convexity of the dissipation potential.
    """
    l1, l2 = law.lambda1, law.lambda2
    if l2 == l1:
        return JumpSign.ZERO
    return JumpSign.POSITIVE if l2 > l1 else JumpSign.NEGATIVE


@dataclass(frozen=True)
class GrowthReport:
    """Empirical constants bracketing the high branch growth."""

    c: float
    C: float
    satisfied: bool


def check_growth_bound(law: AdaptiveLaw, sample_count: int = 200) -> GrowthReport:
    """Sample the high branch on [1, 1e6] against its expected growth rate.

    Reports the tightest empirical constants c and C with
    c * a**((r-2)/2) <= phi2(a) <= C * (1 + a**((r-2)/2)) on the sampled grid.
    The bound counts as satisfied when both constants are positive and finite
    and the lower ratio has stabilized over the last sampled decade (a ratio
    still decaying there signals that no positive c works for large speeds).
    """
    if sample_count < 2:
        raise ValueError("need at least 2 samples")
    r = law.growth_exponent
    a = np.geomspace(1.0, 1e6, sample_count)
    growth = a ** ((r - 2.0) / 2.0)
    phi2 = np.asarray(law.high_normalized.phi(a), dtype=float)

    lower_ratio = phi2 / growth
    upper_ratio = phi2 / (1.0 + growth)
    c = float(lower_ratio.min())
    C = float(upper_ratio.max())

    tail = lower_ratio[a >= a[-1] / 10.0]
    drop = (tail[0] - tail[-1]) / max(abs(tail[0]), 1e-300)
    satisfied = c > 0 and math.isfinite(C) and drop <= 0.05
    return GrowthReport(c=c, C=C, satisfied=bool(satisfied))


@dataclass(frozen=True)
class ConvexityReport:
    violations: int
    worst_gap: float
    trials: int


def convexity_probe(psi: PsiPotential, trials: int, seed: int = 0) -> ConvexityReport:
    """Randomized midpoint-convexity check of the potential.

    Draws (a, b, t) with a, b in [0, 25] and t in [0, 1] and counts how often
    psi((1-t)a + tb) exceeds the chord value beyond 1e-12. Half of the
    samples are stratified to straddle the switch (a < 1 < b), which is where
    a convexity defect of the glued potential must show up. The worst signed
    gap (chord minus function; negative means violated) is reported.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    n_strat = trials // 2
    n_free = trials - n_strat
    a = np.concatenate([rng.uniform(0.0, 25.0, n_free), rng.uniform(0.0, 1.0, n_strat)])
    b = np.concatenate([rng.uniform(0.0, 25.0, n_free), rng.uniform(1.0, 25.0, n_strat)])
    t = rng.uniform(0.0, 1.0, trials)

    chord = (1.0 - t) * psi.value(a) + t * psi.value(b)
    gap = chord - psi.value((1.0 - t) * a + t * b)
    violations = int(np.sum(gap < -1e-12))
    return ConvexityReport(
        violations=violations, worst_gap=float(gap.min()), trials=trials
    )

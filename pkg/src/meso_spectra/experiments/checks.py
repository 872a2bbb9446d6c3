"""Deterministic verification of the transform stability inequalities.

Outside the bulk, perturbing the argument of the Stieltjes transform (or the
T-transform) by ``xi`` moves the value by an amount sandwiched between
``|xi|`` over a power of ``B = max(||H||, |theta|)`` and ``|xi|`` over a
power of the margin ``delta``:

    |xi|/(4 B^2) <= |m(x_m + xi) - 1/theta|   <= 4 |xi| / delta^2
    |xi|/(8 B^3) <= |m'(x_m + xi) - m'(x_m)|  <= 8 |xi| / delta^3
    |xi|/(4 B^3) <= |T(x_t + xi) - 1/theta|   <= 4 B |xi| / delta^3
    |xi|/(8 B^4) <= |T'(x_t + xi) - T'(x_t)|  <= 8 B |xi| / delta^4

where ``x_m = m^(-1)(1/theta)`` and ``x_t = T^(-1)(1/theta)`` must clear the
spectrum's edge by ``2 delta`` and ``|xi| <= delta``.  Everything here is a
pure function of its inputs; repeated calls are identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..spectral_core import MesoSpectraError, SpectrumModel
from ..transforms import (
    TransformDomainError,
    invert_stieltjes,
    invert_t_transform,
    stieltjes,
    stieltjes_deriv,
    t_transform,
    t_transform_deriv,
)

__all__ = [
    "PreconditionError",
    "SandwichResult",
    "SandwichRow",
    "random_stability_sweep",
    "verify_sandwich_bounds",
]

FAMILIES = ("stieltjes-value", "stieltjes-deriv", "t-value", "t-deriv")


class PreconditionError(MesoSpectraError, ValueError):
    """The inequality's hypothesis fails; this is not a failed check."""


@dataclass(frozen=True)
class SandwichRow:
    """One evaluated inequality: family, offset, and the three quantities."""

    family: str
    xi: float
    lower: float
    deviation: float
    upper: float

    @property
    def passed(self) -> bool:
        return self.lower <= self.deviation <= self.upper


@dataclass(frozen=True)
class SandwichResult:
    """All rows for one (spectrum, theta, delta, xi-grid) verification."""

    theta: float
    delta: float
    b_constant: float
    locations: dict
    rows: tuple[SandwichRow, ...]

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def failures(self) -> list[SandwichRow]:
        return [row for row in self.rows if not row.passed]


def _hypothesis_location(
    spectrum: SpectrumModel, theta: float, delta: float, use_t: bool
) -> float:
    name = "T" if use_t else "m"
    try:
        if use_t:
            x = invert_t_transform(spectrum, 1.0 / theta)
        else:
            x = invert_stieltjes(spectrum, 1.0 / theta)
    except TransformDomainError as exc:
        raise PreconditionError(
            f"1/theta is outside the attainable range of {name}: {exc}"
        ) from exc
    if not (x >= spectrum.lam_max + 2.0 * delta or x <= spectrum.lam_min - 2.0 * delta):
        raise PreconditionError(
            f"{name}^(-1)(1/theta) = {x:g} is within 2*delta of the spectrum "
            f"[{spectrum.lam_min:g}, {spectrum.lam_max:g}], delta={delta:g}"
        )
    return x


def verify_sandwich_bounds(
    spectrum: SpectrumModel, theta: float, delta: float, xi_grid
) -> SandwichResult:
    """Evaluate every sandwich inequality at each offset in ``xi_grid``.

    The Stieltjes pair is always evaluated; the T pair only for PSD spectra
    with at least one positive eigenvalue (otherwise T is identically zero
    and has no inverse).  Hypothesis violations raise
    :class:`PreconditionError` rather than producing failed rows.
    """
    if theta == 0.0 or not math.isfinite(theta):
        raise PreconditionError(f"theta must be finite and nonzero, got {theta}")
    if not delta > 0.0:
        raise PreconditionError(f"delta must be positive, got {delta}")
    xi_grid = [float(x) for x in np.atleast_1d(np.asarray(xi_grid, dtype=float))]
    # Offsets far below float resolution at the base point (e.g. the rounded
    # midpoint of a symmetric linspace grid) are meant as zero; snap them so
    # an unrepresentable shift is not scored against a positive lower bound.
    xi_grid = [0.0 if abs(xi) < 1e-9 * delta else xi for xi in xi_grid]
    for xi in xi_grid:
        if abs(xi) > delta:
            raise PreconditionError(f"|xi| = {abs(xi):g} exceeds delta = {delta:g}")

    b = max(spectrum.norm_bound, abs(theta))
    rows: list[SandwichRow] = []
    locations: dict = {}

    x_m = _hypothesis_location(spectrum, theta, delta, use_t=False)
    locations["stieltjes"] = x_m
    # Anchor increments at the transform evaluated at the computed preimage
    # (= 1/theta up to the inversion residual), so solver error does not
    # register as deviation at xi = 0.
    base_value = stieltjes(spectrum, x_m)
    base_deriv = stieltjes_deriv(spectrum, x_m)
    for xi in xi_grid:
        rows.append(SandwichRow(
            family="stieltjes-value",
            xi=xi,
            lower=abs(xi) / (4.0 * b**2),
            deviation=abs(stieltjes(spectrum, x_m + xi) - base_value),
            upper=4.0 * abs(xi) / delta**2,
        ))
        rows.append(SandwichRow(
            family="stieltjes-deriv",
            xi=xi,
            lower=abs(xi) / (8.0 * b**3),
            deviation=abs(stieltjes_deriv(spectrum, x_m + xi) - base_deriv),
            upper=8.0 * abs(xi) / delta**3,
        ))

    if spectrum.is_psd and spectrum.lam_max > 0.0:
        x_t = _hypothesis_location(spectrum, theta, delta, use_t=True)
        locations["t"] = x_t
        base_t_value = t_transform(spectrum, x_t)
        base_t_deriv = t_transform_deriv(spectrum, x_t)
        for xi in xi_grid:
            rows.append(SandwichRow(
                family="t-value",
                xi=xi,
                lower=abs(xi) / (4.0 * b**3),
                deviation=abs(t_transform(spectrum, x_t + xi) - base_t_value),
                upper=4.0 * b * abs(xi) / delta**3,
            ))
            rows.append(SandwichRow(
                family="t-deriv",
                xi=xi,
                lower=abs(xi) / (8.0 * b**4),
                deviation=abs(t_transform_deriv(spectrum, x_t + xi) - base_t_deriv),
                upper=8.0 * b * abs(xi) / delta**4,
            ))

    return SandwichResult(
        theta=theta,
        delta=delta,
        b_constant=b,
        locations=locations,
        rows=tuple(rows),
    )


def random_stability_sweep(
    instances: int = 100, seed: int = 0, xi_points: int = 11
) -> list[SandwichResult]:
    """Seeded sweep over random PSD spectra with separated strengths.

    Instances alternate upper- and lower-side strengths; each strength is
    redrawn until both inverse-transform locations clear the edge by
    ``2 * delta``, so every instance evaluates all four families on a grid
    of ``xi_points`` offsets spanning ``[-delta, delta]``.
    """
    gen = np.random.default_rng(seed)
    results: list[SandwichResult] = []
    for k in range(instances):
        n = int(gen.integers(50, 301))
        spectrum = SpectrumModel.from_values(gen.uniform(0.2, 2.2, n))
        delta = float(gen.uniform(0.05, 0.25))
        upper = k % 2 == 0
        theta = None
        for _ in range(100):
            if upper:
                candidate = float(
                    gen.uniform(spectrum.lam_max + 2.0 * delta + 0.5,
                                spectrum.lam_max + 2.0 * delta + 3.0)
                )
            else:
                candidate = float(-gen.uniform(1.2, 3.0))
            try:
                _hypothesis_location(spectrum, candidate, delta, use_t=False)
                _hypothesis_location(spectrum, candidate, delta, use_t=True)
            except PreconditionError:
                continue
            theta = candidate
            break
        if theta is None:  # pragma: no cover - seeded sweep never hits this
            raise RuntimeError(f"instance {k}: no separated strength found")
        xi_grid = np.linspace(-delta, delta, xi_points)
        results.append(verify_sandwich_bounds(spectrum, theta, delta, xi_grid))
    return results

"""Domain types shared across the package.

The objects here describe the inputs of a perturbation experiment: a base
spectrum, a finite-rank perturbation, the model family tying them together,
and the separation verdict that decides whether a spike produces an outlier.
Everything is immutable after construction; samplers and experiment drivers
treat these as values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MesoSpectraError",
    "InvalidPerturbationError",
    "ModelError",
    "NotSeparatedError",
    "ModelKind",
    "Side",
    "SpectrumModel",
    "PerturbationSpec",
    "SpectralWindow",
    "Model",
    "Separation",
    "check_separation",
    "target_index",
    "norm_bound",
]

# Eigenvalues above this floor (in absolute value) count as nonnegative when
# deciding whether a spectrum is positive semi-definite.
PSD_TOLERANCE = 1e-10

# Orthonormality tolerance for frames, measured entrywise on V^T V - I.
FRAME_TOLERANCE = 1e-10


class MesoSpectraError(Exception):
    """Base class for every error raised by this package."""


class InvalidPerturbationError(MesoSpectraError, ValueError):
    """A perturbation strength is outside its admissible range."""


class ModelError(MesoSpectraError, ValueError):
    """A model is internally inconsistent (missing spectrum, bad shape, ...)."""


class NotSeparatedError(MesoSpectraError, ValueError):
    """A prediction was requested for a spike that fails the separation test.

    Attributes
    ----------
    separation : Separation
        The failing verdict, with the statistic and threshold that decided it.
    """

    def __init__(self, message: str, separation: "Separation"):
        super().__init__(message)
        self.separation = separation


class ModelKind(str, enum.Enum):
    """The four base-matrix families the package understands.

    ``WIGNER`` and ``WISHART`` carry closed-form limiting transforms; the two
    orthogonally invariant kinds work with the empirical transforms of an
    explicit base spectrum.
    """

    WIGNER = "wigner"
    WISHART = "wishart"
    ORTH_INVARIANT_ADDITIVE = "orth-invariant-additive"
    ORTH_INVARIANT_MULTIPLICATIVE = "orth-invariant-multiplicative"

    @property
    def multiplicative(self) -> bool:
        return self in (ModelKind.WISHART, ModelKind.ORTH_INVARIANT_MULTIPLICATIVE)

    @property
    def additive(self) -> bool:
        return not self.multiplicative

    @property
    def closed_form(self) -> bool:
        """True when the limiting transform is known in closed form."""
        return self in (ModelKind.WIGNER, ModelKind.WISHART)


class Side(str, enum.Enum):
    """Which edge of the spectrum an outlier detaches from."""

    UPPER = "upper"
    LOWER = "lower"


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ModelError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class SpectrumModel:
    """A deterministic base spectrum, stored in descending order.

    Use :meth:`from_values` to build one; it sorts the input, decides (or
    checks) positive semi-definiteness, and clips tiny negative eigenvalues
    of PSD spectra to zero.

    Attributes
    ----------
    eigenvalues : numpy.ndarray
        Descending, finite, read-only.
    is_psd : bool
        Whether every eigenvalue is nonnegative (after clipping).
    """

    eigenvalues: np.ndarray = field(repr=False)
    is_psd: bool

    @classmethod
    def from_values(cls, values, is_psd: bool | None = None) -> "SpectrumModel":
        """Canonicalize ``values`` into a spectrum.

        With ``is_psd=None`` the flag is inferred: eigenvalues down to
        ``-1e-10`` count as nonnegative and are clipped to zero.  Passing
        ``is_psd=True`` asserts the same condition and raises ``ModelError``
        if it fails.
        """
        arr = _as_float_array(values, "eigenvalues")
        if arr.size == 0:
            raise ModelError("a spectrum needs at least one eigenvalue")
        arr = np.sort(arr)[::-1].copy()
        lam_min = arr[-1]
        if is_psd is None:
            is_psd = bool(lam_min >= -PSD_TOLERANCE)
        elif is_psd and lam_min < -PSD_TOLERANCE:
            raise ModelError(
                f"spectrum declared PSD but smallest eigenvalue is {lam_min:g}"
            )
        if is_psd:
            np.clip(arr, 0.0, None, out=arr)
        arr.setflags(write=False)
        return cls(eigenvalues=arr, is_psd=is_psd)

    def __post_init__(self):
        ev = self.eigenvalues
        if not isinstance(ev, np.ndarray) or ev.ndim != 1 or ev.size == 0:
            raise ModelError("eigenvalues must be a nonempty 1-d array")
        if np.any(ev[:-1] < ev[1:]):
            raise ModelError("eigenvalues must be in descending order")
        if self.is_psd and ev[-1] < 0.0:
            raise ModelError("PSD spectrum has a negative eigenvalue")

    def __eq__(self, other):
        if not isinstance(other, SpectrumModel):
            return NotImplemented
        return self.is_psd == other.is_psd and np.array_equal(
            self.eigenvalues, other.eigenvalues
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def norm_bound(self) -> float:
        """Operator norm of the diagonal model matrix, ``max |lambda_i|``."""
        return max(abs(self.lam_max), abs(self.lam_min))

    def __repr__(self) -> str:
        return (
            f"SpectrumModel(n={self.n}, range=[{self.lam_min:g}, {self.lam_max:g}], "
            f"is_psd={self.is_psd})"
        )


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """A finite-rank perturbation: strengths plus an optional carrier frame.

    ``thetas`` is stored in descending order; when a frame is given its
    columns are permuted with the strengths so column ``i`` always carries
    ``thetas[i]``.  ``frame=None`` means the perturbation lives on the
    leading coordinate axes.

    Rank zero (``thetas=[]``) is allowed and describes the unperturbed model.
    """

    thetas: np.ndarray = field(repr=False)
    frame: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_values(cls, thetas, frame=None) -> "PerturbationSpec":
        arr = _as_float_array(thetas, "thetas")
        if np.any(arr == 0.0):
            raise InvalidPerturbationError("perturbation strengths must be nonzero")
        order = np.argsort(-arr, kind="stable")
        arr = arr[order].copy()
        arr.setflags(write=False)
        if frame is not None:
            frame = np.asarray(frame, dtype=float)
            if frame.ndim != 2 or frame.shape[1] != arr.size:
                raise ModelError(
                    f"frame shape {frame.shape} does not match rank {arr.size}"
                )
            frame = frame[:, order].copy()
            gram = frame.T @ frame
            dev = np.max(np.abs(gram - np.eye(arr.size))) if arr.size else 0.0
            if dev > FRAME_TOLERANCE:
                raise ModelError(
                    f"frame columns are not orthonormal (deviation {dev:.2e})"
                )
            frame.setflags(write=False)
        return cls(thetas=arr, frame=frame)

    def __post_init__(self):
        th = self.thetas
        if not isinstance(th, np.ndarray) or th.ndim != 1:
            raise ModelError("thetas must be a 1-d array")
        if np.any(th == 0.0):
            raise InvalidPerturbationError("perturbation strengths must be nonzero")
        if np.any(th[:-1] < th[1:]):
            raise ModelError("thetas must be in descending order")
        if self.frame is not None and self.frame.shape[1] != th.size:
            raise ModelError("frame width does not match rank")

    def __eq__(self, other):
        if not isinstance(other, PerturbationSpec):
            return NotImplemented
        if not np.array_equal(self.thetas, other.thetas):
            return False
        if (self.frame is None) != (other.frame is None):
            return False
        return self.frame is None or np.array_equal(self.frame, other.frame)

    __hash__ = None

    @property
    def m(self) -> int:
        """Rank of the perturbation."""
        return int(self.thetas.size)

    @property
    def m_positive(self) -> int:
        """Number of positive strengths (descending order puts them first)."""
        return int(np.sum(self.thetas > 0.0))

    @property
    def norm_bound(self) -> float:
        return float(np.max(np.abs(self.thetas))) if self.m else 0.0

    def with_frame(self, frame: np.ndarray) -> "PerturbationSpec":
        """Return a copy carrying ``frame`` (validated, same strengths)."""
        return PerturbationSpec.from_values(np.asarray(self.thetas), frame)

    def __repr__(self) -> str:
        placed = "coords" if self.frame is None else f"frame{self.frame.shape}"
        return f"PerturbationSpec(m={self.m}, m_positive={self.m_positive}, {placed})"


@dataclass(frozen=True)
class SpectralWindow:
    """A margin ``delta`` around the bulk ``[lower_edge, upper_edge]``.

    Outliers are only sought outside the widened interval
    ``[lower_edge - delta, upper_edge + delta]``; separation thresholds use
    ``2 * delta``.
    """

    delta: float
    lower_edge: float
    upper_edge: float

    def __post_init__(self):
        if not (self.delta > 0.0 and math.isfinite(self.delta)):
            raise ModelError(f"delta must be positive and finite, got {self.delta}")
        if not self.lower_edge <= self.upper_edge:
            raise ModelError("window edges are out of order")

    @classmethod
    def from_spectrum(cls, spectrum: SpectrumModel, delta: float) -> "SpectralWindow":
        return cls(delta=delta, lower_edge=spectrum.lam_min, upper_edge=spectrum.lam_max)

    @classmethod
    def semicircle(cls, delta: float) -> "SpectralWindow":
        return cls(delta=delta, lower_edge=-2.0, upper_edge=2.0)

    @classmethod
    def marchenko_pastur(cls, phi: float, delta: float) -> "SpectralWindow":
        root = math.sqrt(phi)
        return cls(delta=delta, lower_edge=(1.0 - root) ** 2, upper_edge=(1.0 + root) ** 2)


@dataclass(frozen=True, eq=False)
class Model:
    """A base-matrix family plus the data its kind requires.

    Orthogonally invariant kinds need an explicit ``spectrum``; the
    multiplicative one additionally requires it to be PSD.  Wishart needs the
    aspect ratio ``phi = n/p`` in ``(0, 1)`` and optionally a fixed ``p``.
    """

    kind: ModelKind
    spectrum: SpectrumModel | None = None
    phi: float | None = None
    p: int | None = None

    def __post_init__(self):
        kind = self.kind
        if kind is ModelKind.WISHART:
            if self.phi is None or not (0.0 < self.phi < 1.0):
                raise ModelError(f"wishart needs phi in (0, 1), got {self.phi}")
            if self.p is not None and self.p <= 0:
                raise ModelError("p must be positive")
        elif self.phi is not None or self.p is not None:
            raise ModelError(f"phi/p are only meaningful for wishart, not {kind.value}")
        if kind.closed_form:
            if self.spectrum is not None:
                raise ModelError(f"{kind.value} does not take an explicit spectrum")
        else:
            if self.spectrum is None:
                raise ModelError(f"{kind.value} requires an explicit spectrum")
            if kind is ModelKind.ORTH_INVARIANT_MULTIPLICATIVE and not self.spectrum.is_psd:
                raise ModelError("multiplicative perturbation needs a PSD base spectrum")

    @classmethod
    def wigner(cls) -> "Model":
        return cls(kind=ModelKind.WIGNER)

    @classmethod
    def wishart(cls, phi: float, p: int | None = None) -> "Model":
        return cls(kind=ModelKind.WISHART, phi=phi, p=p)

    @classmethod
    def additive(cls, spectrum: SpectrumModel) -> "Model":
        return cls(kind=ModelKind.ORTH_INVARIANT_ADDITIVE, spectrum=spectrum)

    @classmethod
    def multiplicative(cls, spectrum: SpectrumModel) -> "Model":
        return cls(kind=ModelKind.ORTH_INVARIANT_MULTIPLICATIVE, spectrum=spectrum)

    def p_for(self, n: int) -> int:
        """Sample dimension for a Wishart model of size ``n``."""
        if self.kind is not ModelKind.WISHART:
            raise ModelError("p_for is only defined for wishart models")
        return self.p if self.p is not None else int(round(n / self.phi))

    def window(self, delta: float) -> SpectralWindow:
        """The spectral window matching this model's bulk."""
        if self.kind is ModelKind.WIGNER:
            return SpectralWindow.semicircle(delta)
        if self.kind is ModelKind.WISHART:
            return SpectralWindow.marchenko_pastur(self.phi, delta)
        return SpectralWindow.from_spectrum(self.spectrum, delta)


@dataclass(frozen=True)
class Separation:
    """Verdict of the separation test for a single strength.

    ``statistic`` is the quantity compared against ``threshold``: ``|theta|``
    for the closed-form kinds, the inverse-transform location for the
    empirical kinds.  ``side`` is ``None`` when not separated.
    """

    separated: bool
    side: Side | None
    statistic: float
    threshold: float

    def __bool__(self) -> bool:
        return self.separated


def _validate_theta(model: Model, theta: float) -> None:
    if theta == 0.0 or not math.isfinite(theta):
        raise InvalidPerturbationError(f"theta must be finite and nonzero, got {theta}")
    if model.kind.multiplicative and theta <= -1.0:
        raise InvalidPerturbationError(
            f"multiplicative strengths must exceed -1, got {theta}"
        )


def check_separation(model: Model, window: SpectralWindow, theta: float) -> Separation:
    """Decide whether strength ``theta`` detaches an outlier from the bulk.

    Closed-form kinds compare ``|theta|`` with the critical value plus
    ``2 * delta``.  Empirical kinds invert the relevant transform at
    ``1 / theta`` and ask the solution to clear the spectrum's edge by
    ``2 * delta``; an unattainable ``1 / theta`` is reported as not
    separated, never as an error.
    """
    _validate_theta(model, theta)
    # Imported here: transforms depends on the types above.
    from . import transforms

    delta = window.delta
    side = Side.UPPER if theta > 0.0 else Side.LOWER

    if model.kind is ModelKind.WIGNER:
        threshold = 1.0 + 2.0 * delta
        return Separation(abs(theta) >= threshold, side if abs(theta) >= threshold else None,
                          abs(theta), threshold)
    if model.kind is ModelKind.WISHART:
        threshold = math.sqrt(model.phi) + 2.0 * delta
        ok = abs(theta) >= threshold
        return Separation(ok, side if ok else None, abs(theta), threshold)

    spectrum = model.spectrum
    try:
        if model.kind is ModelKind.ORTH_INVARIANT_ADDITIVE:
            location = transforms.invert_stieltjes(spectrum, 1.0 / theta)
        else:
            location = transforms.invert_t_transform(spectrum, 1.0 / theta)
    except transforms.TransformDomainError:
        edge = spectrum.lam_max if theta > 0.0 else spectrum.lam_min
        threshold = edge + 2.0 * delta if theta > 0.0 else edge - 2.0 * delta
        return Separation(False, None, math.nan, threshold)

    if theta > 0.0:
        threshold = spectrum.lam_max + 2.0 * delta
        ok = location >= threshold
    else:
        threshold = spectrum.lam_min - 2.0 * delta
        ok = location <= threshold
    return Separation(ok, side if ok else None, location, threshold)


def target_index(pert: PerturbationSpec, i: int, n: int) -> int:
    """Map the rank ``i`` (1-based, among the strengths) to an eigenvalue index.

    Positive strengths claim the top of the spectrum in order; negative ones
    claim the bottom, so rank ``i`` with ``theta_i < 0`` lands at
    ``n - m + i``.  The result is 1-based.
    """
    if not 1 <= i <= pert.m:
        raise IndexError(f"rank {i} outside 1..{pert.m}")
    if n < pert.m:
        raise ModelError(f"matrix size {n} smaller than perturbation rank {pert.m}")
    if pert.thetas[i - 1] > 0.0:
        return i
    return n - pert.m + i


def norm_bound(spectrum: SpectrumModel, pert: PerturbationSpec) -> float:
    """``B = max(||H||, max |theta|)``, the scale entering stability bounds."""
    return max(spectrum.norm_bound, pert.norm_bound)

"""Asymptotic spectral data of the frequency symbol ``E(ik) = B + i A(k)``.

Low frequencies: the kernel of ``B`` spawns an eigenvalue branch
``lambda_0(ik) = c . ik + k . D k + O(|k|^3)`` whose drift ``c`` and
diffusion ``D`` are the parabolic-limit coefficients; the attached
eigenprojection expands as ``P_0(ik) = P0 + i k . P1 + O(|k|^2)``.  High
frequencies: after conjugating by the diagonalizer ``R(w)`` the symbol is a
perturbation of ``i |k| diag(nu(w))``, and every eigenvalue approaches
``i |k| nu_[j](w) + beta_jm`` with ``beta_jm`` the sub-eigenvalues of the
relaxation matrix compressed to the ``j``-th advection eigenspace.  This
module computes both expansions, calibrates the frequency radius on which
the ``0``-group stays spectrally separated, and provides a tracked
eigenvalue sweep for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import (
    Contour,
    cluster_tolerance,
    contour_projection,
    eigendecompose,
    reduced_resolvent,
    separating_contour,
)
from .model import (
    ConditionReport,
    HyperbolicSystem,
    check_condition_A,
    check_condition_B,
    check_condition_D,
    check_condition_R,
)
from .perturbation import PerturbationFamily, reduce_semisimple_group

__all__ = [
    "ChapmanError",
    "ConditionViolatedError",
    "ConditionBViolatedError",
    "GroupNotSeparatedError",
    "CrossingSetHitError",
    "ParabolicLimit",
    "SpectralGroup",
    "LowFrequencyExpansion",
    "HighFrequencyGroup",
    "HighFrequencyExpansion",
    "SweepPoint",
    "compute_parabolic_limit",
    "low_frequency_expansion",
    "exact_group_projection",
    "calibrate_separation_radius",
    "high_frequency_expansion",
    "eigenvalue_sweep",
]


class ChapmanError(Exception):
    """Base class for errors raised by this module."""


class ConditionViolatedError(ChapmanError):
    """A structural condition required by the requested expansion fails."""

    def __init__(self, message: str, report: ConditionReport | None = None):
        super().__init__(message)
        self.report = report


class ConditionBViolatedError(ConditionViolatedError):
    """The relaxation spectrum does not have a simple kernel with a gap."""


class GroupNotSeparatedError(ChapmanError):
    """The 0-group of the symbol is not isolated at the requested frequency."""


class CrossingSetHitError(ChapmanError):
    """The direction sits on an advection eigenvalue crossing set."""


@dataclass(frozen=True)
class ParabolicLimit:
    """Drift, diffusion, and projection data of the parabolic limit.

    ``projection`` and ``reduced`` are the eigenprojection and reduced
    resolvent of the relaxation matrix at 0; ``corrections[h]`` is the
    first-order projection coefficient attached to the ``h``-th frequency
    component.  ``k . diffusion k`` equals the same form with the symmetric
    part, so downstream code may use ``diffusion`` as stored.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    projection: np.ndarray
    reduced: np.ndarray
    corrections: tuple[np.ndarray, ...]
    gap: float
    imaginary_residual: float

    @property
    def dimension(self) -> int:
        return self.drift.shape[0]

    def drift_phase(self, k: np.ndarray) -> np.ndarray:
        """The scalar ``c . ik`` for a stack of frequency vectors."""
        return 1j * np.asarray(k) @ self.drift

    def diffusion_form(self, k: np.ndarray) -> np.ndarray:
        """The quadratic form ``k . D k`` for a stack of frequency vectors."""
        k = np.asarray(k)
        return np.einsum("...h,hl,...l->...", k, self.diffusion, k)

    def first_order_projection(self, w: np.ndarray) -> np.ndarray:
        """Directional coefficient ``sum_h w_h P1_h``."""
        return sum(w_h * p for w_h, p in zip(np.asarray(w), self.corrections))


@dataclass(frozen=True)
class SpectralGroup:
    """One isolated eigenvalue group of the relaxation matrix."""

    value: complex
    multiplicity: int
    projection: np.ndarray
    nilpotent: np.ndarray


@dataclass(frozen=True)
class LowFrequencyExpansion:
    """Parabolic-limit data plus the dissipative groups of the relaxation."""

    limit: ParabolicLimit
    groups: tuple[SpectralGroup, ...]

    def lambda0_series(self, k: np.ndarray) -> np.ndarray:
        """Second-order model ``c . ik + k . D k`` of the small branch."""
        return self.limit.drift_phase(k) + self.limit.diffusion_form(k)


@dataclass(frozen=True)
class HighFrequencyGroup:
    """Asymptotic data of one advection eigenvalue group.

    All matrices live in the diagonalizer frame (conjugated by ``R(w)``),
    where ``projection`` is an exact diagonal 0/1 pattern.  ``betas[m]`` is
    the ``m``-th eigenvalue of the compressed relaxation on this group, with
    sub-projection ``sub_projections[m]`` and nilpotent ``nilpotents[m]``.
    """

    value: float
    indices: tuple[int, ...]
    projection: np.ndarray
    betas: tuple[complex, ...]
    multiplicities: tuple[int, ...]
    sub_projections: tuple[np.ndarray, ...]
    nilpotents: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class HighFrequencyExpansion:
    """First-order spectral model ``i |k| nu_[j](w) + beta_jm`` at large |k|."""

    direction: np.ndarray
    nu: np.ndarray
    partition: tuple[tuple[int, ...], ...]
    groups: tuple[HighFrequencyGroup, ...]

    def predicted_eigenvalues(self, modulus: float) -> np.ndarray:
        """All ``i |k| nu_[j] + beta_jm`` with multiplicity, as a flat array."""
        out: list[complex] = []
        for group in self.groups:
            for beta, mult in zip(group.betas, group.multiplicities):
                out.extend([1j * modulus * group.value + beta] * mult)
        return np.array(out)


@dataclass(frozen=True)
class SweepPoint:
    """Tracked spectrum of the symbol at one frequency."""

    k: np.ndarray
    eigenvalues: np.ndarray
    cluster_count: int


def _zero_group_contour(system: HyperbolicSystem) -> tuple[Contour, np.ndarray, float]:
    report = check_condition_B(system)
    if not report.passed:
        raise ConditionBViolatedError(
            f"relaxation spectrum violates the kernel condition: {report.summary}",
            report,
        )
    b = system.relaxation
    eigsys = eigendecompose(b)
    zero = eigsys.cluster_near(0.0, 10.0 * cluster_tolerance(b))
    contour = separating_contour(eigsys.values, np.array(zero.indices))
    return contour, eigsys.values, float(report.data["gap"])


def compute_parabolic_limit(system: HyperbolicSystem) -> ParabolicLimit:
    """Drift and diffusion coefficients of the parabolic limit.

    With ``P0`` and ``Q0`` the eigenprojection and reduced resolvent of the
    relaxation matrix at its simple kernel eigenvalue,

    * ``c_h = trace(A_h P0)``,
    * ``D_hl = (trace(A_h P0 A_l Q0) + trace(A_h Q0 A_l P0)) / 2``,
    * ``P1_h = -(P0 A_h Q0 + Q0 A_h P0)``.

    The traces are real up to quadrature error for real input; the imaginary
    magnitude discarded is recorded in ``imaginary_residual``.

    Raises:
        ConditionBViolatedError: if the relaxation spectrum fails the check.
    """
    contour, eigenvalues, gap = _zero_group_contour(system)
    b = system.relaxation
    p0 = contour_projection(b, contour, eigenvalues=eigenvalues)
    q0 = reduced_resolvent(b, 0.0, contour, eigenvalues=eigenvalues)
    d = system.dimension
    drift = np.empty(d, dtype=complex)
    diffusion = np.empty((d, d), dtype=complex)
    corrections = []
    for h, a_h in enumerate(system.advections):
        drift[h] = np.trace(a_h @ p0)
        corrections.append(-(p0 @ a_h @ q0 + q0 @ a_h @ p0))
        for l, a_l in enumerate(system.advections):
            diffusion[h, l] = 0.5 * (
                np.trace(a_h @ p0 @ a_l @ q0) + np.trace(a_h @ q0 @ a_l @ p0)
            )
    imaginary_residual = max(
        float(np.max(np.abs(drift.imag))), float(np.max(np.abs(diffusion.imag)))
    )
    if imaginary_residual > 1e-10:
        raise ChapmanError(
            f"drift/diffusion traces have imaginary residue {imaginary_residual:.3e}"
        )
    return ParabolicLimit(
        drift=drift.real,
        diffusion=diffusion.real,
        projection=p0,
        reduced=q0,
        corrections=tuple(corrections),
        gap=gap,
        imaginary_residual=imaginary_residual,
    )


def low_frequency_expansion(system: HyperbolicSystem) -> LowFrequencyExpansion:
    """Parabolic-limit data plus projections of the dissipative groups.

    Raises:
        ConditionBViolatedError: if the relaxation spectrum check fails.
        ConditionViolatedError: if uniform dissipation fails.
    """
    dissipation = check_condition_D(system)
    if not dissipation.passed:
        raise ConditionViolatedError(
            f"uniform dissipation fails: {dissipation.summary}", dissipation
        )
    limit = compute_parabolic_limit(system)
    b = system.relaxation
    eigsys = eigendecompose(b)
    tol = 10.0 * cluster_tolerance(b)
    eye = np.eye(system.size)
    groups = []
    for cluster in eigsys.clusters:
        if abs(cluster.value) <= tol:
            continue
        contour = separating_contour(eigsys.values, np.array(cluster.indices))
        projection = contour_projection(b, contour, eigenvalues=eigsys.values)
        groups.append(
            SpectralGroup(
                value=cluster.value,
                multiplicity=cluster.multiplicity,
                projection=projection,
                nilpotent=(b - cluster.value * eye) @ projection,
            )
        )
    return LowFrequencyExpansion(limit=limit, groups=tuple(groups))


def exact_group_projection(system: HyperbolicSystem, k: np.ndarray) -> np.ndarray:
    """Eigenprojection of ``E(ik)`` onto its eigenvalue nearest zero.

    The projection is computed by contour quadrature on a circle of half the
    spectral gap around that eigenvalue.

    Raises:
        GroupNotSeparatedError: if the nearest-zero eigenvalue is within
            1e-8 of the rest of the spectrum (shrink ``|k|``).
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    symbol = system.symbol(k)
    eigenvalues = np.linalg.eigvals(symbol)
    small = int(np.argmin(np.abs(eigenvalues)))
    others = np.delete(eigenvalues, small)
    if others.size == 0:
        return np.eye(system.size, dtype=complex)
    gap = float(np.min(np.abs(others - eigenvalues[small])))
    # The floor 1e-8 alone misses exact collisions, where rounding splits a
    # defective pair by about sqrt(eps); scale the guard with the spectrum.
    threshold = max(1e-8, 10.0 * cluster_tolerance(symbol))
    if gap <= threshold:
        raise GroupNotSeparatedError(
            f"0-group gap {gap:.3e} at |k| = {np.linalg.norm(k):.6g} "
            f"is below {threshold:.1e}"
        )
    contour = Contour(center=complex(eigenvalues[small]), radius=0.5 * gap)
    return contour_projection(symbol, contour, eigenvalues=eigenvalues)


def calibrate_separation_radius(
    system: HyperbolicSystem,
    *,
    direction_count: int = 32,
    ratio: float = 2.0 ** (1.0 / 8.0),
    max_levels: int = 96,
) -> float:
    """Largest frequency modulus with the 0-group still safely separated.

    Scans a geometric grid of moduli upward from ``gap/64`` along sampled
    directions, following the small eigenvalue by continuation, and stops a
    direction at the first level where its gap to the rest of the spectrum
    drops to half the relaxation gap.  The returned radius is the last level
    passing in every direction; continuation (rather than re-picking the
    smallest eigenvalue per level) keeps the scan from jumping past an
    exceptional point.
    """
    from .model import sphere_samples

    _, _, gap0 = _zero_group_contour(system)
    threshold = 0.5 * gap0
    directions = sphere_samples(system.dimension, direction_count)
    radius = np.inf
    for w in directions:
        epsilon = gap0 / 64.0
        last_good = 0.0
        branch = 0.0 + 0.0j
        for _ in range(max_levels):
            eigenvalues = np.linalg.eigvals(system.symbol(epsilon * w))
            follow = int(np.argmin(np.abs(eigenvalues - branch)))
            others = np.delete(eigenvalues, follow)
            gap = float(np.min(np.abs(others - eigenvalues[follow])))
            if gap <= threshold:
                break
            branch = eigenvalues[follow]
            last_good = epsilon
            epsilon *= ratio
        radius = min(radius, last_good)
    if not radius > 0.0:
        raise GroupNotSeparatedError(
            "0-group separation already fails at the smallest calibration level"
        )
    return float(radius)


def _partition_by_rows(nu: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for row in range(nu.shape[0]):
        for group in groups:
            if np.max(np.abs(nu[row] - nu[group[0]])) <= tol:
                group.append(row)
                break
        else:
            groups.append([row])
    return groups


def high_frequency_expansion(
    system: HyperbolicSystem,
    w: np.ndarray,
    *,
    reports: dict[str, ConditionReport] | None = None,
) -> HighFrequencyExpansion:
    """First-order large-frequency model of the symbol spectrum along ``w``.

    In the diagonalizer frame the symbol is ``|k| (i diag(nu(w)) + z M)``
    with ``z = 1/|k|`` and ``M = R(w)^{-1} B R(w)``; reducing each advection
    eigenvalue group of the diagonal base term against ``M`` yields the
    eigenvalue model ``i |k| nu_[j](w) + beta_jm + O(1/|k|)``.

    Passing precomputed condition ``reports`` (keys "A", "R", "D") skips the
    corresponding checks.

    Raises:
        ConditionViolatedError: if conditions A, R, or D fail or the system
            has no diagonalizer.
        CrossingSetHitError: if ``w`` sits on a crossing of two advection
            eigenvalue groups and a 1e-7 nudge does not resolve it.
    """
    w = np.asarray(w, dtype=float)
    w = w / np.linalg.norm(w)
    if system.diagonalizer is None:
        raise ConditionViolatedError(
            "high-frequency expansion requires the closed-form diagonalizer R(w)"
        )
    reports = dict(reports or {})
    if "A" not in reports:
        reports["A"] = check_condition_A(system)
    if "R" not in reports:
        reports["R"] = check_condition_R(system)
    if "D" not in reports:
        reports["D"] = check_condition_D(system)
    for name in ("A", "R", "D"):
        if not reports[name].passed:
            raise ConditionViolatedError(
                f"condition {name} fails: {reports[name].summary}", reports[name]
            )

    nu = np.asarray(reports["A"].data["nu"], dtype=float)
    partition = _partition_by_rows(nu, 1e-9)
    scale = 1.0 + float(np.max(np.abs(nu)))

    def group_values(direction: np.ndarray) -> np.ndarray:
        return nu[:, 0] + nu[:, 1:] @ direction

    values = group_values(w)
    representatives = [values[group[0]] for group in partition]
    if len(representatives) > 1:
        spread = np.min(np.abs(np.diff(np.sort(np.asarray(representatives)))))
        if spread < 1e-7 * scale:
            tangent = np.roll(w, 1) if system.dimension > 1 else np.zeros(1)
            tangent -= w * np.dot(tangent, w)
            norm = np.linalg.norm(tangent)
            nudged = w if norm < 1e-12 else (w + 1e-7 * tangent / norm)
            nudged = nudged / np.linalg.norm(nudged)
            values = group_values(nudged)
            representatives = [values[group[0]] for group in partition]
            spread = np.min(np.abs(np.diff(np.sort(np.asarray(representatives)))))
            if spread < 1e-7 * scale:
                raise CrossingSetHitError(
                    f"direction {w.tolist()} lies on an advection eigenvalue crossing set"
                )
            w = nudged

    r = np.asarray(system.diagonalizer(w), dtype=float)
    compressed = np.linalg.solve(r, system.relaxation @ r)
    family = PerturbationFamily(1j * np.diag(values), compressed)
    groups = []
    for group, representative in zip(partition, representatives):
        reduced = reduce_semisimple_group(family, 1j * representative)
        groups.append(
            HighFrequencyGroup(
                value=float(representative),
                indices=tuple(group),
                projection=reduced.projection,
                betas=reduced.eigenvalues,
                multiplicities=reduced.multiplicities,
                sub_projections=reduced.projections,
                nilpotents=reduced.nilpotents,
            )
        )
    return HighFrequencyExpansion(
        direction=w,
        nu=nu,
        partition=tuple(tuple(g) for g in partition),
        groups=tuple(groups),
    )


def eigenvalue_sweep(
    system: HyperbolicSystem, frequencies: np.ndarray
) -> list[SweepPoint]:
    """Spectrum of the symbol along a frequency path, with branch tracking.

    The first point is sorted by (real, imaginary) part; subsequent points
    are matched to their predecessor by minimal-distance assignment, so each
    column of the result follows one continuous branch.  ``cluster_count``
    records the number of eigenvalue clusters (a merge flags an exceptional
    point).
    """
    frequencies = np.atleast_2d(np.asarray(frequencies, dtype=float))
    points: list[SweepPoint] = []
    previous: np.ndarray | None = None
    for k in frequencies:
        eigsys = eigendecompose(system.symbol(k))
        values = eigsys.values
        if previous is not None:
            cost = np.abs(values[:, None] - previous[None, :])
            rows, cols = linear_sum_assignment(cost)
            permutation = np.empty(values.shape[0], dtype=int)
            permutation[cols] = rows
            values = values[permutation]
        points.append(
            SweepPoint(k=k.copy(), eigenvalues=values, cluster_count=len(eigsys.clusters))
        )
        previous = values
    return points

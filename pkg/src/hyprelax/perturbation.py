"""Analytic perturbation series for polynomial matrix families.

A family ``T(z) = T0 + z T1 + z^2 T2 + ...`` with an isolated eigenvalue
group of ``T0`` at ``lam0`` has a total spectral projection ``P(z)`` and
group eigenvalues that are analytic in ``z`` near zero.  This module
computes their Taylor coefficients two independent ways:

* closed-form second order via the auxiliary chain ``X(0) = -P0``,
  ``X(j) = Q0^j``, ``X(-j) = -N0^j`` built from the unperturbed projection
  ``P0``, nilpotent ``N0`` and reduced resolvent ``Q0``
  (:func:`total_projection_series`);
* arbitrary order by contour quadrature of resolvent products summed over
  compositions of the order (:func:`simple_eigenvalue_series`,
  :func:`weighted_mean_series`).

The quadrature route needs no structure beyond isolation of the group, so it
doubles as the oracle for the closed forms.  :func:`reduce_semisimple_group`
splits a semisimple degenerate group by its first-order restriction, and
:func:`partition_derivative` differentiates ``exp(polynomial)`` by summing
over set partitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    Contour,
    EigenCluster,
    EigenSystem,
    cauchy_integral,
    cluster_tolerance,
    contour_projection,
    eigendecompose,
    reduced_resolvent,
    separating_contour,
)

__all__ = [
    "PerturbationError",
    "NotAnEigenvalueError",
    "NotSimpleError",
    "NotSemisimpleError",
    "PreconditionViolatedError",
    "OrderTooLargeError",
    "PerturbationFamily",
    "GroupExpansion",
    "ReducedGroup",
    "SymmetryCheckResult",
    "total_projection_series",
    "projection_coefficients",
    "simple_eigenvalue_series",
    "weighted_mean_series",
    "reduce_semisimple_group",
    "symmetry_vanishing_check",
    "partition_derivative",
]

MAX_SERIES_ORDER = 6


class PerturbationError(Exception):
    """Base class for errors raised by this module."""


class NotAnEigenvalueError(PerturbationError):
    """The reference value is not within clustering tolerance of sigma(T0)."""


class NotSimpleError(PerturbationError):
    """The eigenvalue group has multiplicity greater than one."""


class NotSemisimpleError(PerturbationError):
    """The eigenvalue group carries a nontrivial nilpotent part."""


class PreconditionViolatedError(PerturbationError):
    """An input fails a structural requirement of the requested expansion."""


class OrderTooLargeError(PerturbationError):
    """The requested series order exceeds the supported maximum."""


class PerturbationFamily:
    """Finite polynomial family ``T(z) = sum_j z^j * terms[j]``."""

    def __init__(self, t0: np.ndarray, t1: np.ndarray, higher: tuple[np.ndarray, ...] = ()):
        terms = [np.asarray(t0), np.asarray(t1), *(np.asarray(t) for t in higher)]
        shape = terms[0].shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"family terms must be square matrices, got shape {shape}")
        for j, term in enumerate(terms):
            if term.shape != shape:
                raise ValueError(f"term {j} has shape {term.shape}, expected {shape}")
        self.terms: tuple[np.ndarray, ...] = tuple(terms)

    @property
    def dim(self) -> int:
        return self.terms[0].shape[0]

    @property
    def degree(self) -> int:
        return len(self.terms) - 1

    @property
    def is_linear(self) -> bool:
        return all(np.all(t == 0) for t in self.terms[2:])

    def term(self, j: int) -> np.ndarray:
        """Coefficient matrix of ``z^j`` (zero beyond the stored degree)."""
        if 0 <= j <= self.degree:
            return self.terms[j]
        return np.zeros_like(self.terms[0])

    def evaluate(self, z: complex) -> np.ndarray:
        out = np.zeros(self.terms[0].shape, dtype=np.result_type(self.terms[0].dtype, type(z)))
        for term in reversed(self.terms):
            out = z * out + term
        return out


@dataclass(frozen=True)
class GroupExpansion:
    """Second-order data of a perturbed eigenvalue group.

    ``projection``, ``nilpotent`` and ``reduced`` describe the unperturbed
    group; ``corrections[j-1]`` is the ``z^j`` coefficient of the total
    projection for ``j = 1, 2``.
    """

    eigenvalue: complex
    multiplicity: int
    projection: np.ndarray
    nilpotent: np.ndarray
    reduced: np.ndarray
    corrections: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class ReducedGroup:
    """Splitting of a semisimple group by its first-order restriction.

    ``operator`` is ``P0 T1 P0``; ``eigenvalues[j]`` are its distinct
    eigenvalues on the range of ``P0``, with sub-projections
    ``projections[j]`` and nilpotents ``nilpotents[j]``.
    """

    eigenvalue: complex
    multiplicity: int
    projection: np.ndarray
    operator: np.ndarray
    eigenvalues: tuple[complex, ...]
    multiplicities: tuple[int, ...]
    projections: tuple[np.ndarray, ...]
    nilpotents: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class SymmetryCheckResult:
    """Outcome of the odd-coefficient vanishing test."""

    passed: bool
    coefficients: np.ndarray
    odd_residual: float
    commutator_residual: float
    anticommutator_residual: float


def _group_context(
    family: PerturbationFamily, lam0: complex
) -> tuple[EigenSystem, EigenCluster, Contour]:
    t0 = family.terms[0]
    eigsys = eigendecompose(t0)
    cluster = eigsys.cluster_near(lam0, 10.0 * cluster_tolerance(t0))
    if cluster is None:
        raise NotAnEigenvalueError(
            f"{lam0} is not an eigenvalue of the base term (spectrum {np.round(eigsys.values, 6)})"
        )
    try:
        contour = separating_contour(eigsys.values, np.array(cluster.indices))
    except ValueError as exc:
        raise PreconditionViolatedError(str(exc)) from exc
    return eigsys, cluster, contour


def _x_chain(
    projection: np.ndarray, nilpotent: np.ndarray, reduced: np.ndarray, depth: int
) -> dict[int, np.ndarray]:
    # Auxiliary operators X(0) = -P0, X(j) = Q0^j, X(-j) = -N0^j; products of
    # the resolvent's Laurent coefficients that appear in the projection
    # series.
    chain = {0: -projection}
    power = np.eye(projection.shape[0], dtype=projection.dtype)
    for j in range(1, depth + 1):
        power = power @ reduced
        chain[j] = power
    power = np.eye(projection.shape[0], dtype=projection.dtype)
    for j in range(1, depth + 1):
        power = power @ nilpotent
        chain[-j] = -power
    return chain


def total_projection_series(family: PerturbationFamily, lam0: complex) -> GroupExpansion:
    """First- and second-order coefficients of the total projection.

    Uses the closed forms ``P1 = sum_{i+j=1} X(i) T1 X(j)`` and
    ``P2 = sum_{i+j=1} X(i) T2 X(j) - sum_{i+j+h=2} X(i) T1 X(j) T1 X(h)``,
    with indices running over the stored chain.

    Raises:
        NotAnEigenvalueError: if ``lam0`` is not in the spectrum of ``T0``.
    """
    eigsys, cluster, contour = _group_context(family, lam0)
    t0, t1 = family.terms[0], family.terms[1]
    t2 = family.term(2)
    p0 = contour_projection(t0, contour, eigenvalues=eigsys.values)
    n0 = (t0 - cluster.value * np.eye(family.dim)) @ p0
    q0 = reduced_resolvent(t0, cluster.value, contour, eigenvalues=eigsys.values)

    depth = family.dim + 1
    x = _x_chain(p0, n0, q0, depth)
    span = range(-depth, depth + 1)

    p1 = sum(x[i] @ t1 @ x[j] for i in span for j in span if i + j == 1)
    p2 = sum(x[i] @ t2 @ x[j] for i in span for j in span if i + j == 1)
    p2 = p2 - sum(
        x[i] @ t1 @ x[j] @ t1 @ x[h]
        for i in span
        for j in span
        for h in span
        if i + j + h == 2
    )
    return GroupExpansion(
        eigenvalue=cluster.value,
        multiplicity=cluster.multiplicity,
        projection=p0,
        nilpotent=n0,
        reduced=q0,
        corrections=(p1, p2),
    )


def _compositions(total: int) -> list[tuple[int, ...]]:
    if total == 0:
        return [()]
    out = []
    for first in range(1, total + 1):
        for rest in _compositions(total - first):
            out.append((first,) + rest)
    return out


def projection_coefficients(
    family: PerturbationFamily, lam0: complex, order: int
) -> list[np.ndarray]:
    """Taylor coefficients ``[P0, P1, ..., P_order]`` of the total projection.

    Each ``P_j`` is a contour integral of resolvent products summed over the
    compositions of ``j``, so the result is structure-free: it is valid for
    degenerate and defective groups alike and serves as the oracle for the
    closed second-order forms.

    Raises:
        OrderTooLargeError: if ``order`` exceeds ``MAX_SERIES_ORDER``.
    """
    if order > MAX_SERIES_ORDER:
        raise OrderTooLargeError(f"order {order} exceeds the supported {MAX_SERIES_ORDER}")
    eigsys, cluster, contour = _group_context(family, lam0)
    t0 = family.terms[0]
    eye = np.eye(family.dim, dtype=complex)

    def resolvents(z: np.ndarray) -> np.ndarray:
        shifted = z[:, None, None] * eye - t0
        return np.linalg.solve(shifted, np.broadcast_to(eye, shifted.shape))

    coefficients = [contour_projection(t0, contour, eigenvalues=eigsys.values)]
    for j in range(1, order + 1):
        terms = [
            nu
            for nu in _compositions(j)
            if all(part <= family.degree for part in nu)
        ]

        def integrand(z: np.ndarray, terms=terms) -> np.ndarray:
            rz = resolvents(z)
            total = np.zeros_like(rz)
            for nu in terms:
                product = rz
                for part in nu:
                    product = product @ family.term(part) @ rz
                total += product
            return total

        coefficients.append(cauchy_integral(integrand, contour))
    return coefficients


def simple_eigenvalue_series(
    family: PerturbationFamily, lam0: complex, order: int = 4
) -> np.ndarray:
    """Taylor coefficients of the eigenvalue branch through a simple ``lam0``.

    Returns ``[lam0, lam1, ..., lam_order]`` with
    ``lam_j = trace(T1 @ P_{j-1}) / j``, valid for linear pencils.

    Raises:
        NotSimpleError: if the group at ``lam0`` is degenerate.
        PreconditionViolatedError: if the family has terms beyond ``T1``.
        OrderTooLargeError: if ``order`` exceeds ``MAX_SERIES_ORDER``.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if order > MAX_SERIES_ORDER:
        raise OrderTooLargeError(f"order {order} exceeds the supported {MAX_SERIES_ORDER}")
    if not family.is_linear:
        raise PreconditionViolatedError(
            "the trace recursion for a simple branch requires a linear pencil"
        )
    _, cluster, _ = _group_context(family, lam0)
    if cluster.multiplicity != 1:
        raise NotSimpleError(
            f"eigenvalue {lam0} has multiplicity {cluster.multiplicity}"
        )
    projections = projection_coefficients(family, lam0, order - 1)
    t1 = family.terms[1]
    coeffs = np.empty(order + 1, dtype=complex)
    coeffs[0] = cluster.value
    for j in range(1, order + 1):
        coeffs[j] = np.trace(t1 @ projections[j - 1]) / j
    return coeffs


def weighted_mean_series(
    family: PerturbationFamily, lam0: complex, order: int = 2
) -> np.ndarray:
    """Coefficients of the weighted mean of a perturbed eigenvalue group.

    The weighted mean ``(1/m) trace(T(z) P(z))`` over the group of
    multiplicity ``m`` is analytic even when the group splits.  Coefficients
    are assembled from the projection series via
    ``m * hat_lam_j = sum_{i+l=j} trace(T_i_shifted @ P_l)`` with
    ``T_0_shifted = T0 - lam0``; this handles families with higher terms and
    defective groups.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if order > MAX_SERIES_ORDER:
        raise OrderTooLargeError(f"order {order} exceeds the supported {MAX_SERIES_ORDER}")
    _, cluster, _ = _group_context(family, lam0)
    m = cluster.multiplicity
    projections = projection_coefficients(family, lam0, order)
    shifted0 = family.terms[0] - cluster.value * np.eye(family.dim)
    coeffs = np.empty(order + 1, dtype=complex)
    coeffs[0] = cluster.value
    for j in range(1, order + 1):
        total = np.trace(shifted0 @ projections[j])
        for i in range(1, min(j, family.degree) + 1):
            total += np.trace(family.term(i) @ projections[j - i])
        coeffs[j] = total / m
    return coeffs


def reduce_semisimple_group(family: PerturbationFamily, lam0: complex) -> ReducedGroup:
    """Split a semisimple degenerate group by the restriction of ``T1``.

    The group eigenvalues behave as ``lam0 + z * beta_j + o(z)`` where
    ``beta_j`` are the eigenvalues of ``P0 T1 P0`` on the range of ``P0``.
    To isolate them with contour machinery the complement is shifted far
    away: projections and nilpotents are extracted from
    ``P0 T1 P0 + gamma (I - P0)``.

    Raises:
        NotSemisimpleError: if the group at ``lam0`` carries a nilpotent.
    """
    eigsys, cluster, contour = _group_context(family, lam0)
    t0, t1 = family.terms[0], family.terms[1]
    eye = np.eye(family.dim)
    p0 = contour_projection(t0, contour, eigenvalues=eigsys.values)
    n0 = (t0 - cluster.value * eye) @ p0
    nilpotent_norm = float(np.linalg.norm(n0))
    if nilpotent_norm > 1e-8 * (1.0 + float(np.linalg.norm(t0))):
        raise NotSemisimpleError(
            f"group at {lam0} has nilpotent part of norm {nilpotent_norm:.3e}"
        )

    operator = p0 @ t1 @ p0
    gamma = 2.0 * (1.0 + float(np.linalg.norm(operator)))
    shifted = operator + gamma * (eye - p0)
    inner = eigendecompose(shifted)
    tol = cluster_tolerance(shifted)

    values: list[complex] = []
    multiplicities: list[int] = []
    projections: list[np.ndarray] = []
    nilpotents: list[np.ndarray] = []
    for sub in inner.clusters:
        if abs(sub.value - gamma) <= 100.0 * tol and cluster.multiplicity < family.dim:
            continue
        sub_contour = separating_contour(inner.values, np.array(sub.indices))
        proj = contour_projection(shifted, sub_contour, eigenvalues=inner.values)
        values.append(sub.value)
        multiplicities.append(sub.multiplicity)
        projections.append(proj)
        nilpotents.append((shifted - sub.value * eye) @ proj)
    return ReducedGroup(
        eigenvalue=cluster.value,
        multiplicity=cluster.multiplicity,
        projection=p0,
        operator=operator,
        eigenvalues=tuple(values),
        multiplicities=tuple(multiplicities),
        projections=tuple(projections),
        nilpotents=tuple(nilpotents),
    )


def symmetry_vanishing_check(
    family: PerturbationFamily,
    s: np.ndarray,
    lam0: complex = 0.0,
    *,
    order: int = 3,
    threshold: float = 1e-9,
) -> SymmetryCheckResult:
    """Verify that a reversal symmetry kills the odd eigenvalue coefficients.

    An invertible ``s`` with ``s T0 = T0 s`` and ``s T1 = -T1 s`` conjugates
    ``T(z)`` to ``T(-z)``, so the branch through a simple ``lam0`` is even in
    ``z``.  The check computes the series through ``order`` and tests the odd
    coefficients against ``threshold``.

    Raises:
        PreconditionViolatedError: if ``s`` is singular or the (anti)
            commutation residuals are not at rounding level.
    """
    s = np.asarray(s)
    t0, t1 = family.terms[0], family.terms[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        s_condition = float(np.linalg.cond(s))
    if not s_condition < 1e12:
        raise PreconditionViolatedError(
            f"symmetry matrix is numerically singular (condition {s_condition:.3e})"
        )
    scale = 1.0 + float(np.linalg.norm(s)) * (
        float(np.linalg.norm(t0)) + float(np.linalg.norm(t1))
    )
    commutator = float(np.linalg.norm(s @ t0 - t0 @ s))
    anticommutator = float(np.linalg.norm(s @ t1 + t1 @ s))
    if commutator > 1e-8 * scale:
        raise PreconditionViolatedError(
            f"symmetry does not commute with the base term (residual {commutator:.3e})"
        )
    if anticommutator > 1e-8 * scale:
        raise PreconditionViolatedError(
            f"symmetry does not anticommute with the first-order term (residual {anticommutator:.3e})"
        )
    coefficients = simple_eigenvalue_series(family, lam0, order)
    odd = np.abs(coefficients[1::2])
    odd_residual = float(odd.max()) if odd.size else 0.0
    return SymmetryCheckResult(
        passed=bool(odd_residual <= threshold),
        coefficients=coefficients,
        odd_residual=odd_residual,
        commutator_residual=commutator,
        anticommutator_residual=anticommutator,
    )


def _set_partitions(count: int):
    # Restricted-growth strings: code[i] <= 1 + max(code[:i]); each string is
    # one set partition of {0, ..., count-1}.
    if count == 0:
        yield []
        return
    code = [0] * count
    while True:
        blocks: dict[int, list[int]] = {}
        for i, c in enumerate(code):
            blocks.setdefault(c, []).append(i)
        yield list(blocks.values())
        i = count - 1
        while i > 0:
            if code[i] <= max(code[:i]):
                code[i] += 1
                for j in range(i + 1, count):
                    code[j] = 0
                break
            i -= 1
        else:
            return


def _poly_derivative(
    poly: dict[tuple[int, ...], float], beta: tuple[int, ...]
) -> dict[tuple[int, ...], float]:
    out: dict[tuple[int, ...], float] = {}
    for exponents, coeff in poly.items():
        new_exponents = []
        factor = float(coeff)
        for e, b in zip(exponents, beta):
            if b > e:
                factor = 0.0
                break
            for step in range(b):
                factor *= e - step
            new_exponents.append(e - b)
        if factor != 0.0:
            key = tuple(new_exponents)
            out[key] = out.get(key, 0.0) + factor
    return out


def _poly_eval(poly: dict[tuple[int, ...], float], point: np.ndarray) -> float:
    total = 0.0
    for exponents, coeff in poly.items():
        term = coeff
        for x, e in zip(point, exponents):
            if e:
                term *= x**e
        total += term
    return float(total)


def partition_derivative(
    alpha: tuple[int, ...],
    poly: dict[tuple[int, ...], float],
    point: np.ndarray,
) -> float:
    """Mixed derivative ``d^alpha exp(q)`` at ``point`` for polynomial ``q``.

    Expands the derivative over set partitions of the ``|alpha|`` derivative
    slots: each partition contributes the product over its blocks of the
    corresponding mixed derivative of ``q``, all multiplied by
    ``exp(q(point))``.

    ``poly`` maps exponent tuples to coefficients; ``alpha`` and every
    exponent tuple must have the same length as ``point``.

    Raises:
        OrderTooLargeError: if ``|alpha|`` exceeds ``MAX_SERIES_ORDER``.
    """
    point = np.asarray(point, dtype=float)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != point.shape[0]:
        raise ValueError(f"alpha length {len(alpha)} does not match point dimension {point.shape[0]}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    total_order = sum(alpha)
    if total_order > MAX_SERIES_ORDER:
        raise OrderTooLargeError(
            f"derivative order {total_order} exceeds the supported {MAX_SERIES_ORDER}"
        )
    dim = point.shape[0]
    for exponents in poly:
        if len(exponents) != dim:
            raise ValueError(f"polynomial key {exponents} does not match dimension {dim}")

    slots: list[int] = []
    for coordinate, repeats in enumerate(alpha):
        slots.extend([coordinate] * repeats)

    derivative_cache: dict[tuple[int, ...], float] = {}

    def block_value(block: list[int]) -> float:
        beta = [0] * dim
        for slot in block:
            beta[slots[slot]] += 1
        key = tuple(beta)
        if key not in derivative_cache:
            derivative_cache[key] = _poly_eval(_poly_derivative(poly, key), point)
        return derivative_cache[key]

    total = 0.0
    for partition in _set_partitions(len(slots)):
        product = 1.0
        for block in partition:
            product *= block_value(block)
            if product == 0.0:
                break
        total += product
    return float(np.exp(_poly_eval(poly, point)) * total)

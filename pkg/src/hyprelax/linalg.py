"""Dense linear-algebra kernels shared by the higher layers.

Everything here works on plain numpy arrays: linear solves with residual
verification, eigendecomposition with multiplicity clustering, a batched
matrix exponential, and adaptive contour quadrature for spectral projections
and reduced resolvents.  All tolerances are explicit and conservative; the
routines raise typed errors instead of returning silently degraded results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinalgError",
    "SingularMatrixError",
    "ConvergenceFailureError",
    "ContourTouchesSpectrumError",
    "QuadratureNotConvergedError",
    "EigenCluster",
    "EigenSystem",
    "Contour",
    "cluster_tolerance",
    "solve_linear",
    "eigendecompose",
    "matrix_exponential",
    "cauchy_integral",
    "contour_projection",
    "reduced_resolvent",
    "separating_contour",
]


class LinalgError(Exception):
    """Base class for errors raised by this module."""


class SingularMatrixError(LinalgError):
    """A linear solve hit a numerically singular matrix."""


class ConvergenceFailureError(LinalgError):
    """An iterative LAPACK eigenvalue routine failed to converge."""


class ContourTouchesSpectrumError(LinalgError):
    """An eigenvalue lies on (or numerically on) an integration contour."""


class QuadratureNotConvergedError(LinalgError):
    """Contour quadrature did not reach tolerance at the node cap."""


def _frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m).ravel()))


def cluster_tolerance(m: np.ndarray) -> float:
    """Absolute tolerance under which eigenvalues of ``m`` are grouped."""
    return 1e-8 * (1.0 + _frobenius(m))


@dataclass(frozen=True)
class EigenCluster:
    """A group of mutually close eigenvalues treated as one spectral point.

    ``value`` is the arithmetic mean of the members and ``indices`` points
    into the owning :class:`EigenSystem` ordering.
    """

    value: complex
    indices: tuple[int, ...]

    @property
    def multiplicity(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition with clustered multiplicity structure.

    ``values[i]`` pairs with column ``vectors[:, i]``; entries are sorted by
    (real, imaginary) part.  ``condition`` is the 2-norm condition number of
    the eigenvector matrix (infinite for defective input).
    """

    values: np.ndarray
    vectors: np.ndarray
    condition: float
    clusters: tuple[EigenCluster, ...] = field(default=())

    def cluster_near(self, z: complex, tol: float) -> EigenCluster | None:
        """Return the cluster whose members include a point within ``tol``."""
        for cluster in self.clusters:
            if np.min(np.abs(self.values[list(cluster.indices)] - z)) <= tol:
                return cluster
        return None


@dataclass(frozen=True)
class Contour:
    """A positively oriented circle ``center + radius * exp(i theta)``.

    ``nodes`` is the starting trapezoid node count; adaptive routines double
    it as needed.
    """

    center: complex
    radius: float
    nodes: int = 64

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise ValueError(f"contour radius must be positive, got {self.radius}")
        if self.nodes < 16 or (self.nodes & (self.nodes - 1)) != 0:
            raise ValueError(f"node count must be a power of two >= 16, got {self.nodes}")


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` and verify the residual.

    Raises:
        SingularMatrixError: if the factorization fails or the relative
            residual exceeds ``1e-10 * (1 + |a| |x|)``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"linear solve failed: {exc}") from exc
    residual = _frobenius(a @ x - b)
    bound = 1e-10 * (1.0 + _frobenius(a) * _frobenius(x))
    if not residual <= bound:
        raise SingularMatrixError(
            f"solution residual {residual:.3e} exceeds {bound:.3e}; matrix is numerically singular"
        )
    return x


def _cluster_indices(values: np.ndarray, tol: float) -> tuple[EigenCluster, ...]:
    n = values.shape[0]
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    clusters = [
        EigenCluster(value=complex(np.mean(values[idx])), indices=tuple(idx))
        for idx in (sorted(g) for g in groups.values())
    ]
    clusters.sort(key=lambda c: (c.value.real, c.value.imag))
    return tuple(clusters)


def eigendecompose(m: np.ndarray, *, cluster_tol: float | None = None) -> EigenSystem:
    """Eigendecompose a square matrix and cluster nearby eigenvalues.

    Eigenvalues closer than ``cluster_tol`` (default
    ``1e-8 * (1 + |m|_F)``) are merged transitively into one cluster.

    Raises:
        ConvergenceFailureError: if the QR iteration does not converge.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    try:
        values, vectors = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailureError(f"eigendecomposition failed: {exc}") from exc
    order = np.lexsort((values.imag, values.real))
    values = values[order]
    vectors = vectors[:, order]
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = float(np.linalg.cond(vectors))
    if cluster_tol is None:
        cluster_tol = cluster_tolerance(m)
    return EigenSystem(
        values=values,
        vectors=vectors,
        condition=condition,
        clusters=_cluster_indices(values, cluster_tol),
    )


# Degree-13 diagonal Pade coefficients and the matching 1-norm threshold for
# unit roundoff 2^-53.
_PADE13_THETA = 5.371920351148152
_PADE13_B = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)


def matrix_exponential(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade(13) core.

    Accepts a single matrix or a stack ``(..., n, n)``; the whole stack is
    scaled by one shared power of two (the worst member's), so the batch is
    evaluated with three fused matmul chains regardless of size.
    """
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected shape (..., n, n), got {m.shape}")
    dtype = np.result_type(m.dtype, np.float64)
    a = m.astype(dtype, copy=True)
    n = a.shape[-1]
    one_norms = np.abs(a).sum(axis=-2).max(axis=-1)
    largest = float(np.max(one_norms)) if one_norms.size else 0.0
    squarings = 0
    if largest > _PADE13_THETA:
        squarings = int(np.ceil(np.log2(largest / _PADE13_THETA)))
        a /= 2.0**squarings

    b = _PADE13_B
    eye = np.broadcast_to(np.eye(n, dtype=dtype), a.shape)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    try:
        r = np.linalg.solve(v - u, v + u)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"Pade denominator is singular: {exc}") from exc
    for _ in range(squarings):
        r = r @ r
    return r


def cauchy_integral(
    integrand,
    contour: Contour,
    *,
    tol: float = 1e-11,
    max_nodes: int = 4096,
) -> np.ndarray:
    """Evaluate ``(1 / 2 pi i) * contour integral of integrand(z) dz``.

    ``integrand`` must map an array of contour points ``(m,)`` to values of
    shape ``(m, ...)``.  Trapezoid nodes start at ``contour.nodes`` and double
    until two successive levels agree to ``tol`` in Frobenius norm.

    Raises:
        QuadratureNotConvergedError: if agreement is not reached by
            ``max_nodes``.
    """

    def level(count: int) -> np.ndarray:
        theta = 2.0 * np.pi * np.arange(count) / count
        rot = np.exp(1j * theta)
        z = contour.center + contour.radius * rot
        values = np.asarray(integrand(z))
        weights = (contour.radius * rot).reshape((count,) + (1,) * (values.ndim - 1))
        return (values * weights).mean(axis=0)

    nodes = contour.nodes
    previous = level(nodes)
    while nodes < max_nodes:
        nodes *= 2
        current = level(nodes)
        if _frobenius(current - previous) < tol:
            return current
        previous = current
    raise QuadratureNotConvergedError(
        f"contour quadrature still changing at {max_nodes} nodes (tol {tol:g})"
    )


def _check_contour_clearance(eigenvalues: np.ndarray, contour: Contour) -> None:
    clearance = np.abs(np.abs(eigenvalues - contour.center) - contour.radius)
    nearest = float(np.min(clearance)) if clearance.size else np.inf
    if nearest < 1e-6 * contour.radius:
        raise ContourTouchesSpectrumError(
            f"eigenvalue within {nearest:.3e} of the contour (radius {contour.radius:g})"
        )


def _resolvent_factory(m: np.ndarray):
    n = m.shape[0]
    eye = np.eye(n, dtype=np.result_type(m.dtype, np.complex128))

    def resolvents(z: np.ndarray) -> np.ndarray:
        # (z I - M)^{-1} for each contour node, one batched solve.
        shifted = z[:, None, None] * eye - m
        try:
            return np.linalg.solve(shifted, np.broadcast_to(eye, shifted.shape))
        except np.linalg.LinAlgError as exc:
            raise ContourTouchesSpectrumError(
                f"resolvent solve failed on the contour: {exc}"
            ) from exc

    return resolvents


def contour_projection(
    m: np.ndarray,
    contour: Contour,
    *,
    eigenvalues: np.ndarray | None = None,
) -> np.ndarray:
    """Spectral projection onto the eigenvalues of ``m`` inside ``contour``.

    Computed as ``(1 / 2 pi i) * integral of (z I - m)^{-1} dz``.  The result
    is complex; callers with real spectral groups may take the real part.

    Raises:
        ContourTouchesSpectrumError: if an eigenvalue lies within
            ``1e-6 * radius`` of the contour circle.
        QuadratureNotConvergedError: if the adaptive trapezoid rule stalls.
    """
    m = np.asarray(m)
    if eigenvalues is None:
        eigenvalues = np.linalg.eigvals(m)
    _check_contour_clearance(np.asarray(eigenvalues), contour)
    return cauchy_integral(_resolvent_factory(m), contour)


def reduced_resolvent(
    m: np.ndarray,
    lam: complex,
    contour: Contour,
    *,
    eigenvalues: np.ndarray | None = None,
) -> np.ndarray:
    """Reduced resolvent of ``m`` at the eigenvalue ``lam``.

    This is the inverse of ``m - lam`` restricted to the complementary
    invariant subspace (and zero on the eigenspace of ``lam``), extracted as
    ``-(1 / 2 pi i) * integral of (z I - m)^{-1} / (z - lam) dz`` over a
    contour enclosing ``lam`` and no other eigenvalue group.
    """
    m = np.asarray(m)
    if eigenvalues is None:
        eigenvalues = np.linalg.eigvals(m)
    _check_contour_clearance(np.asarray(eigenvalues), contour)
    resolvents = _resolvent_factory(m)

    def integrand(z: np.ndarray) -> np.ndarray:
        return resolvents(z) / (z - lam)[:, None, None]

    return -cauchy_integral(integrand, contour)


def separating_contour(
    eigenvalues: np.ndarray,
    inside: np.ndarray,
    *,
    nodes: int = 64,
) -> Contour:
    """Circle around the eigenvalue subset ``inside`` splitting the gap.

    ``inside`` is an index array (or boolean mask) into ``eigenvalues``.  The
    center is the subset mean and the radius bisects the annulus between the
    subset and the nearest excluded eigenvalue; for a singleton subset this
    is half the spectral gap.  With nothing excluded the radius is one unit
    beyond the subset spread.

    Raises:
        ValueError: if the subset is empty or the two groups interleave so
            that no separating circle exists around the mean.
    """
    eigenvalues = np.asarray(eigenvalues)
    mask = np.zeros(eigenvalues.shape[0], dtype=bool)
    mask[inside] = True
    if not mask.any():
        raise ValueError("cannot build a contour around an empty eigenvalue subset")
    center = complex(np.mean(eigenvalues[mask]))
    spread = float(np.max(np.abs(eigenvalues[mask] - center)))
    if mask.all():
        return Contour(center=center, radius=spread + 1.0, nodes=nodes)
    nearest = float(np.min(np.abs(eigenvalues[~mask] - center)))
    if not nearest > spread:
        raise ValueError(
            f"eigenvalue groups are not separated (spread {spread:g} vs gap {nearest:g})"
        )
    return Contour(center=center, radius=0.5 * (spread + nearest), nodes=nodes)

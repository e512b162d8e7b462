"""Spatial correlation matrices for the BS array and the RIS.

Covers the exponential (Toeplitz) ULA model, its Kronecker extension to
planar arrays, the isotropic-scattering sinc kernel between RIS elements,
and the eigen machinery used by the beamformers.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12
DIAGONAL_TOL = 1e-12
PSD_TOL = 1e-10
MAX_DIM = 2**16


class CorrelationError(ValueError):
    """Raised for matrices that violate the correlation-matrix invariants."""


class EigenSolverError(RuntimeError):
    """Raised when the Jacobi eigensolver misses its residual tolerance."""


class Kind(enum.Enum):
    ULA_TOEPLITZ = "ula_toeplitz"
    UPA_KRONECKER = "upa_kronecker"
    RIS_SINC = "ris_sinc"
    IDENTITY = "identity"
    CUSTOM = "custom"


@dataclass(frozen=True)
class GridShape:
    """Rectangular array size: ``horizontal`` columns by ``vertical`` rows."""

    horizontal: int
    vertical: int

    def __post_init__(self):
        for name in ("horizontal", "vertical"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"GridShape.{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def total(self) -> int:
        return self.horizontal * self.vertical

    def __str__(self):
        return f"{self.horizontal}x{self.vertical}"

    @classmethod
    def square(cls, side: int) -> "GridShape":
        return cls(side, side)


@dataclass(frozen=True)
class RisLayout:
    """Planar RIS lattice; ``spacing`` and ``wavelength`` are in meters.

    Elements are indexed row-major: element ``n = row * horizontal + col``
    sits at ``(col * spacing, row * spacing, 0)``.
    """

    grid: GridShape
    spacing: float
    wavelength: float = 0.1

    def __post_init__(self):
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise ValueError(f"RIS spacing must be positive, got {self.spacing!r}")
        if not (np.isfinite(self.wavelength) and self.wavelength > 0):
            raise ValueError(f"wavelength must be positive, got {self.wavelength!r}")

    @classmethod
    def from_fraction(cls, grid: GridShape, fraction: float, wavelength: float = 0.1) -> "RisLayout":
        """Build a layout whose pitch is ``fraction`` wavelengths."""
        return cls(grid, fraction * wavelength, wavelength)

    @property
    def n_elements(self) -> int:
        return self.grid.total

    @property
    def positions(self) -> np.ndarray:
        rows, cols = np.divmod(np.arange(self.grid.total), self.grid.horizontal)
        pos = np.zeros((self.grid.total, 3))
        pos[:, 0] = cols * self.spacing
        pos[:, 1] = rows * self.spacing
        return pos


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Hermitian PSD matrix with unit diagonal plus a tag for how it was built."""

    entries: np.ndarray
    kind: Kind = Kind.CUSTOM
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.array(self.entries)
        if not np.iscomplexobj(a):
            a = a.astype(float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise CorrelationError(f"correlation matrix must be square and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise CorrelationError("correlation matrix has non-finite entries")
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL:
            raise CorrelationError("correlation matrix is not Hermitian")
        if np.max(np.abs(np.diag(a) - 1.0)) > DIAGONAL_TOL:
            raise CorrelationError("correlation matrix must have a unit diagonal")
        lam_min = np.linalg.eigvalsh(a)[0]
        if lam_min < -PSD_TOL:
            raise CorrelationError(f"correlation matrix is not PSD (min eigenvalue {lam_min:.3e})")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def to_csv(self) -> str:
        return matrix_to_csv(self.entries)


def _entries(corr) -> np.ndarray:
    if isinstance(corr, CorrelationMatrix):
        return corr.entries
    return np.asarray(corr)


def identity_correlation(n: int) -> CorrelationMatrix:
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return CorrelationMatrix(np.eye(n), Kind.IDENTITY)


def ula_correlation(n: int, rho: float) -> CorrelationMatrix:
    """Exponential correlation ``[R]_ij = rho**|i - j|`` of an n-element ULA."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"number of antennas must be a positive integer, got {n!r}")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    n = int(n)
    if rho == 0.0:
        return CorrelationMatrix(np.eye(n), Kind.IDENTITY, {"n": n, "rho": 0.0})
    idx = np.arange(n)
    entries = float(rho) ** np.abs(idx[:, None] - idx[None, :])
    return CorrelationMatrix(entries, Kind.ULA_TOEPLITZ, {"n": n, "rho": float(rho)})


def upa_correlation(shape: GridShape, rho: float) -> CorrelationMatrix:
    """Kronecker approximation ``R_h (x) R_v`` for a planar array."""
    if shape.total > MAX_DIM:
        raise ValueError(f"UPA with {shape.total} antennas exceeds the {MAX_DIM} limit")
    r_h = ula_correlation(shape.horizontal, rho).entries
    r_v = ula_correlation(shape.vertical, rho).entries
    kind = Kind.IDENTITY if rho == 0.0 else Kind.UPA_KRONECKER
    return CorrelationMatrix(np.kron(r_h, r_v), kind, {"shape": shape, "rho": float(rho)})


def ris_sinc_correlation(layout: RisLayout) -> CorrelationMatrix:
    """Isotropic-scattering RIS correlation ``sinc(2 d_nm / wavelength)``.

    ``sinc`` is the normalized ``sin(pi x) / (pi x)``.
    """
    pos = layout.positions
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    entries = np.sinc(2.0 * dist / layout.wavelength)
    return CorrelationMatrix(entries, Kind.RIS_SINC, {"layout": layout})


def hadamard_self(corr) -> np.ndarray:
    """``R^T o R``; for a real symmetric R this is the entrywise square."""
    r = _entries(corr)
    return np.real(r.T * r) if np.isrealobj(r) else r.T * r


def matrix_sqrt(corr) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in ``[-1e-10, 0)`` are clamped to zero; anything more
    negative raises :class:`CorrelationError`.
    """
    r = _entries(corr)
    lam, vec = np.linalg.eigh(r)
    if lam[0] < -PSD_TOL:
        raise CorrelationError(f"matrix is not PSD (min eigenvalue {lam[0]:.3e})")
    root = (vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.conj().T
    root = 0.5 * (root + root.conj().T)
    return np.real(root) if np.isrealobj(r) else root


def _round_robin(n: int):
    """Tournament schedule: n-1 rounds of disjoint (p, q) pairs covering all pairs."""
    players = list(range(n + (n % 2)))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def hermitian_eig(matrix, tol: float = 1e-12, max_rotations: int | None = None):
    """Eigen-decomposition of a Hermitian matrix by Jacobi rotations.

    Rotations are applied in round-robin order, so each step annihilates
    ``n // 2`` disjoint off-diagonal pairs at once.

    Parameters
    ----------
    matrix : array_like
        Hermitian (or real symmetric) square matrix.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``tol * ||A||_F``.
    max_rotations : int, optional
        Rotation budget, defaults to ``10**4 * dim``.

    Returns
    -------
    eigenvalues : ndarray
        Real eigenvalues in ascending order.
    eigenvectors : ndarray
        Columns are the matching unit eigenvectors.
    """
    a = np.array(_entries(matrix))
    dtype = complex if np.iscomplexobj(a) else float
    a = a.astype(dtype)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-10 * max(1.0, np.abs(a).max(initial=0.0)):
        raise ValueError("matrix must be Hermitian")
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=dtype)
    budget = 10**4 * n if max_rotations is None else max_rotations
    target = tol * np.linalg.norm(a)
    skip_below = 0.1 * target / max(n, 1)
    rounds = _round_robin(n)
    rotations = 0
    while np.linalg.norm(a - np.diag(np.diag(a))) > target:
        for p, q in rounds:
            a_pq = a[p, q]
            mag = np.abs(a_pq)
            active = mag > skip_below
            if not active.any():
                continue
            rotations += int(active.sum())
            if rotations > budget:
                raise EigenSolverError(f"Jacobi did not converge within {budget} rotations")
            safe = np.where(active, mag, 1.0)
            phase = np.where(active, a_pq / safe, 1.0)
            theta = (a[q, q].real - a[p, p].real) / (2.0 * safe)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
            g00, g01 = c, s
            g10, g11 = -s * phase.conj(), c * phase.conj()
            for m in (a, v):
                cp, cq = m[:, p].copy(), m[:, q]
                m[:, p] = cp * g00 + cq * g10
                m[:, q] = cp * g01 + cq * g11
            rp, rq = a[p, :].copy(), a[q, :]
            a[p, :] = g00[:, None] * rp + np.conj(g10)[:, None] * rq
            a[q, :] = g01[:, None] * rp + np.conj(g11)[:, None] * rq
            a[p, q] = np.where(active, 0.0, a[p, q])
            a[q, p] = np.conj(a[p, q])
            if dtype is complex:
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    lam = np.diag(a).real.copy()
    order = np.argsort(lam, kind="stable")
    return lam[order], v[:, order]


def _fix_phase(u: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(u) > 1e-12)
    if nz.size == 0:
        return u
    lead = u[nz[0]]
    return u * (np.conj(lead) / abs(lead))


def dominant_eigenpair(corr, tol: float = 1e-12, residual_tol: float = 1e-10):
    """Largest eigenvalue and its unit eigenvector.

    The eigenvector's first non-negligible component is made real and
    positive. Ties go to the lowest index returned by the solver.

    Raises
    ------
    EigenSolverError
        If ``||R u - lambda u||`` exceeds ``residual_tol``.
    """
    r = _entries(corr)
    if r.shape[0] == 1:
        return float(np.real(r[0, 0])), np.ones(1, dtype=complex)
    lam, vec = hermitian_eig(r, tol=tol)
    top = lam.max()
    # first index (in Jacobi column order) among the tied maximum
    candidates = np.flatnonzero(lam >= top - 1e-14 * max(1.0, abs(top)))
    k = candidates[0]
    u = _fix_phase(vec[:, k] / np.linalg.norm(vec[:, k]))
    residual = np.linalg.norm(r @ u - top * u)
    if residual > residual_tol * max(1.0, abs(top)):
        raise EigenSolverError(f"dominant eigenpair residual {residual:.3e} exceeds {residual_tol:.1e}")
    return float(top), u


def matrix_to_csv(matrix) -> str:
    """Row-major CSV with ``re,im`` pairs for each entry."""
    m = np.asarray(_entries(matrix), dtype=complex)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in m:
        writer.writerow([f"{x:.17g}" for z in row for x in (z.real, z.imag)])
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    vals = np.array([[float(x) for x in r] for r in rows])
    out = vals[:, 0::2] + 1j * vals[:, 1::2]
    return out.real if not np.any(out.imag) else out

"""Band spectra, Fermi projectors, and Chern numbers of the fibered decomposition.

Chern numbers are evaluated with overlap-determinant link variables: for
the frame ``W(t)`` of selected eigenvectors, the link along direction
``mu`` is the phase of ``det(W(t)^t W(t + e_mu))`` and the plaquette flux
is the principal-branch argument of the product of the four links around
the plaquette.  For gapped projectors the flux sum is ``2 pi`` times an
integer, stable under grid refinement once every plaquette is admissible.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    GapTooSmallError,
    InadmissiblePlaquetteError,
    InvariantViolationError,
)
from .fibering import CovariantOperator, FiberedSamples, TorusGrid, fiber_field
from .lattice import EXACT_TOL
from .models import ModelInstance, mathieu_model

THREADS_ENV = "BLOCH_FIBER_THREADS"

#: selected bands must be separated from the rest by at least this much
DEFAULT_GAP_FLOOR = 1e-6

#: plaquette fluxes must stay this far from the principal-branch cut
PLAQUETTE_MARGIN = 1e-6


def _worker_count() -> int:
    workers = min(4, os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        workers = min(workers, max(1, int(cap)))
    return workers


def eigh_field(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched Hermitian eigensolve over a field of matrices.

    Node chunks may be processed by worker threads (capped by the
    ``BLOCH_FIBER_THREADS`` environment variable); results are assembled
    in node order, so the output is independent of the worker count.
    """
    shape = values.shape[:-2]
    q = values.shape[-1]
    flat = values.reshape(-1, q, q)
    workers = _worker_count()
    if workers <= 1 or flat.shape[0] < 2 * workers:
        w, v = np.linalg.eigh(flat)
    else:
        chunks = np.array_split(flat, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(np.linalg.eigh, chunks))
        w = np.concatenate([p[0] for p in parts])
        v = np.concatenate([p[1] for p in parts])
    return w.reshape(*shape, q), v.reshape(*shape, q, q)


@dataclass(frozen=True, eq=False)
class BandData:
    """Eigenvalues of the fiber hamiltonian over a torus grid, sorted ascending."""

    grid: TorusGrid
    energies: np.ndarray
    band_count: int

    def __post_init__(self):
        if self.energies.shape != self.grid.shape + (self.band_count,):
            raise ValueError(f"energies shape {self.energies.shape} inconsistent")
        if np.any(np.diff(self.energies, axis=-1) < 0):
            raise InvariantViolationError("band energies are not sorted ascending")

    def band_intervals(self) -> list[tuple[float, float]]:
        """Per-band ``[min, max]`` over the grid."""
        flat = self.energies.reshape(-1, self.band_count)
        return [(float(flat[:, r].min()), float(flat[:, r].max()))
                for r in range(self.band_count)]


@dataclass(frozen=True, eq=False)
class BerryData:
    """Plaquette fluxes and the integer Chern number of a band set."""

    grid: TorusGrid
    band_set: tuple[int, ...]
    plaquette_fluxes: np.ndarray
    chern: int

    def __post_init__(self):
        total = float(self.plaquette_fluxes.sum()) / (2.0 * np.pi)
        if abs(total - self.chern) > 1e-6:
            raise InvariantViolationError(
                f"flux sum / 2 pi = {total} is not within 1e-6 of {self.chern}")


def _fiber_hamiltonian(source) -> CovariantOperator:
    if isinstance(source, ModelInstance):
        return source.hamiltonian()
    if isinstance(source, CovariantOperator):
        return source
    raise TypeError(f"expected a model or covariant operator, got {type(source)!r}")


def band_spectrum(source, grid: TorusGrid) -> BandData:
    """Diagonalize the fiber hamiltonian at every grid node."""
    cov = _fiber_hamiltonian(source)
    if not cov.is_hermitian(EXACT_TOL):
        raise InvariantViolationError("fiber hamiltonian is not Hermitian")
    field = fiber_field(cov, grid)
    w, _ = eigh_field(field.values)
    return BandData(grid=grid, energies=w, band_count=cov.q)


def gap_check(bands: BandData, r: int) -> float:
    """Minimum over nodes of the gap between bands ``r`` and ``r+1`` (1-based)."""
    if not 1 <= r <= bands.band_count - 1:
        raise IndexError(f"band index {r} outside 1..{bands.band_count - 1}")
    diff = bands.energies[..., r] - bands.energies[..., r - 1]
    return float(diff.min())


def _band_separation(w: np.ndarray, band_set: tuple[int, ...],
                     ) -> tuple[float, tuple[int, ...]]:
    """Smallest energy distance between the band set and its complement.

    Returns the separation and the grid index of the node attaining it.
    """
    q = w.shape[-1]
    comp = tuple(sorted(set(range(q)) - set(band_set)))
    if not band_set or not comp:
        return math.inf, ()
    sel = w[..., list(band_set)]
    rest = w[..., list(comp)]
    dist = np.abs(sel[..., :, None] - rest[..., None, :]).min(axis=(-2, -1))
    if dist.ndim == 0:
        return float(dist), ()
    node = np.unravel_index(int(np.argmin(dist)), dist.shape)
    return float(dist.min()), tuple(int(x) for x in node)


def spectral_projector(H_fiber: np.ndarray, band_set,
                       gap_floor: float = DEFAULT_GAP_FLOOR,
                       node=None) -> np.ndarray:
    """Orthogonal projector onto the selected (energy-ordered) bands.

    Requires the selected bands to be separated from the complement by at
    least ``gap_floor`` at this matrix; degeneracies inside the selection
    are harmless.
    """
    H_fiber = np.asarray(H_fiber)
    q = H_fiber.shape[0]
    band_set = tuple(sorted(int(r) for r in band_set))
    if any(not 0 <= r < q for r in band_set):
        raise IndexError(f"band set {band_set} outside 0..{q - 1}")
    w, V = np.linalg.eigh(H_fiber)
    sep, _ = _band_separation(w, band_set)
    if sep < gap_floor:
        where = f" at node {node}" if node is not None else ""
        raise GapTooSmallError(
            f"bands {band_set} separated by {sep:.3e} < {gap_floor:.1e}{where}")
    P = np.zeros((q, q), dtype=complex)
    if band_set:
        W = V[:, list(band_set)]
        P = W @ W.conj().T
    return P


def _frames_from_hamiltonian(source, band_set: tuple[int, ...], grid: TorusGrid,
                             gap_floor: float) -> np.ndarray:
    cov = _fiber_hamiltonian(source)
    if not cov.is_hermitian(EXACT_TOL):
        raise InvariantViolationError("fiber hamiltonian is not Hermitian")
    field = fiber_field(cov, grid)
    w, V = eigh_field(field.values)
    sep, node = _band_separation(w, band_set)
    if sep < gap_floor:
        raise GapTooSmallError(
            f"bands {band_set} separated by {sep:.3e} < {gap_floor:.1e} "
            f"at node {node} (t = {grid.node(node)})")
    return V[..., list(band_set)]


def _frames_from_projectors(samples: FiberedSamples, band_set: tuple[int, ...],
                            ) -> np.ndarray:
    w, V = eigh_field(samples.values)
    occ = w > 0.5
    ranks = occ.sum(axis=-1)
    if not np.all(ranks == ranks.flat[0]):
        raise InvariantViolationError("projector field has non-constant rank")
    rank = int(ranks.flat[0])
    if band_set and len(band_set) != rank:
        raise ValueError(f"band set size {len(band_set)} != projector rank {rank}")
    # eigh sorts ascending, so the occupied directions are the trailing ones
    return V[..., -rank:] if rank else V[..., :0]


def chern_number(source, band_set, grid: TorusGrid,
                 gap_floor: float = DEFAULT_GAP_FLOOR) -> BerryData:
    """Chern number of the sub-bundle spanned by the selected bands over the 2-torus.

    ``source`` is a model, a covariant hamiltonian, or a precomputed field
    of fiber projectors.  Raises :class:`GapTooSmallError` when the bands
    touch their complement and :class:`InadmissiblePlaquetteError` when a
    plaquette flux reaches the principal branch cut (refine the grid).
    """
    if grid.N != 2:
        raise ValueError(f"Chern numbers need a 2-D torus grid, got N={grid.N}")
    band_set = tuple(sorted(int(r) for r in band_set))

    if isinstance(source, FiberedSamples):
        frames = _frames_from_projectors(source, band_set)
    else:
        frames = _frames_from_hamiltonian(source, band_set, grid, gap_floor)

    if frames.shape[-1] == 0:
        fluxes = np.zeros(grid.shape)
        return BerryData(grid=grid, band_set=band_set,
                         plaquette_fluxes=fluxes, chern=0)

    def link(axis: int) -> np.ndarray:
        ahead = np.roll(frames, -1, axis=axis)
        overlap = np.einsum("xyqr,xyqs->xyrs", frames.conj(), ahead)
        det = np.linalg.det(overlap)
        mod = np.abs(det)
        if mod.min() < 1e-12:
            raise InadmissiblePlaquetteError(
                "frames at adjacent nodes are orthogonal; refine the grid")
        return det / mod

    U1 = link(0)
    U2 = link(1)
    # plaquette traversed t2-first: this orientation makes the lowest band
    # of the magnetic square lattice at small positive flux carry Chern +1
    loop = U2 * np.roll(U1, -1, axis=1) * np.roll(U2, -1, axis=0).conj() * U1.conj()
    fluxes = np.angle(loop)
    if np.abs(fluxes).max() > np.pi - PLAQUETTE_MARGIN:
        raise InadmissiblePlaquetteError(
            f"plaquette flux {np.abs(fluxes).max():.6f} reaches the branch cut "
            f"on an L={grid.L} grid; refine the grid")
    chern = int(round(float(fluxes.sum()) / (2.0 * np.pi)))
    return BerryData(grid=grid, band_set=band_set,
                     plaquette_fluxes=fluxes, chern=chern)


def reduced_fractions(q_max: int) -> list[Fraction]:
    """All reduced ``p/q`` with ``0 <= p < q <= q_max`` (q ascending, p ascending)."""
    out = []
    for q in range(1, q_max + 1):
        for p in range(q):
            if math.gcd(p, q) == 1:
                out.append(Fraction(p, q))
    return out


def butterfly(q_max: int, L: int = 128, M: int = 6,
              ) -> list[tuple[int, int, list[tuple[float, float]]]]:
    """Band intervals of the chain rotation-pair hamiltonian over rational fluxes.

    One row ``(p, q, intervals)`` per reduced fraction, with the ``q``
    band intervals ``[min, max]`` of the fibered spectrum on an ``L``-point
    torus grid.  Rows are ordered q ascending then p ascending.
    """
    if q_max < 2:
        raise ValueError(f"need q_max >= 2, got {q_max}")
    rows = []
    for frac in reduced_fractions(q_max):
        p, q = frac.numerator, frac.denominator
        model = mathieu_model(p, q, M=max(M, 3))
        bands = band_spectrum(model, TorusGrid(N=1, L=L))
        rows.append((p, q, bands.band_intervals()))
    return rows


def frame_continuity_check(samples: FiberedSamples) -> float:
    """Largest Frobenius increment between adjacent grid nodes (with wrap-around).

    For trigonometric-polynomial sections this scales as ``O(1/L)`` and
    halves under grid doubling; a non-shrinking increment flags a
    discontinuous section (for example a projector across a closing gap).
    """
    values = samples.values
    trailing = tuple(range(samples.grid.N, values.ndim))
    worst = 0.0
    for axis in range(samples.grid.N):
        diff = np.roll(values, -1, axis=axis) - values
        norms = np.sqrt(np.sum(np.abs(diff) ** 2, axis=trailing))
        worst = max(worst, float(norms.max()))
    return worst

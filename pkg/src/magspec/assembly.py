"""Sparse discretisations of the magnetic and non-magnetic operators.

Both operators use the 5-point stencil on a masked grid. The magnetic one
multiplies each hopping term by the parallel transport ``exp(-i theta)`` of
its link (Peierls substitution), with ``theta = n * int_p^q A . dl``. The
discrete covariant difference is then ``(exp(-i theta_pq) u_q - u_p) / h``,
which tends to ``(d/dx - i A_x) u``. Hermiticity, gauge covariance and the
diamagnetic inequality hold exactly at the matrix level.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .errors import NegativeScale, NonAdjacent, WeightOverflow
from .grid import GridDomain
from .weights import Weight

# Largest allowed n * (max phi - min phi) in the weighted form.
OVERFLOW_GUARD = 300.0


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """An assembled operator together with the data it came from."""

    matrix: sp.csr_matrix
    kind: str
    n: float
    grid: GridDomain
    weight: Weight

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def scale(self) -> float:
        """Natural size of the entries, ``4/h**2``."""
        return 4.0 / self.grid.h ** 2

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def dump(self, fh: TextIO | None = None) -> str | None:
        """Write ``row col real imag`` triplets sorted by ``(row, col)``."""
        return dump_triplets(self.matrix, fh)


@dataclass(frozen=True, eq=False)
class GeneralizedPair:
    """Stiffness/mass pair for the weighted form ``4 int |u_z|^2 e^{2 n phi}``.

    ``mass`` is the lumped (diagonal) mass, stored as a vector.
    """

    stiffness: sp.csr_matrix
    mass: np.ndarray
    shift: float
    n: float
    grid: GridDomain
    weight: Weight

    @property
    def dim(self) -> int:
        return self.stiffness.shape[0]

    @property
    def mass_matrix(self) -> sp.dia_matrix:
        return sp.diags(self.mass)


def _check_scale(n: float) -> float:
    n = float(n)
    if not n >= 0:
        raise NegativeScale(f"semi-classical scale must be >= 0, got {n}")
    return n


def _laplace_diag(g: GridDomain, w: Weight, n: float) -> np.ndarray:
    pts = g.points()
    diag = np.full(g.N, 4.0 / g.h ** 2)
    if n != 0:
        diag = diag + n * np.asarray(w.lap(pts[:, 0], pts[:, 1]), dtype=float)
    return diag


def _all_links(g: GridDomain) -> tuple[np.ndarray, np.ndarray]:
    px, qx = g.links("x")
    py, qy = g.links("y")
    return np.concatenate([px, py]), np.concatenate([qx, qy])


def _hermitian_csr(diag, p, q, vals, N) -> sp.csr_matrix:
    rows = np.concatenate([np.arange(N), p, q])
    cols = np.concatenate([np.arange(N), q, p])
    data = np.concatenate([diag.astype(vals.dtype), vals, np.conj(vals)])
    m = sp.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()
    m.sort_indices()
    return m


def assemble_nonmagnetic(g: GridDomain, w: Weight, n: float) -> OperatorMatrix:
    """``-Delta_h + n * lap(phi)`` with Dirichlet conditions on the mask."""
    n = _check_scale(n)
    p, q = _all_links(g)
    vals = np.full(len(p), -1.0 / g.h ** 2)
    m = _hermitian_csr(_laplace_diag(g, w, n), p, q, vals, g.N)
    return OperatorMatrix(m, "nonmagnetic", n, g, w)


def _canonical(p: np.ndarray, q: np.ndarray):
    """Order each segment's endpoints lexicographically; return flip flags."""
    flip = (q[:, 0] < p[:, 0]) | ((q[:, 0] == p[:, 0]) & (q[:, 1] < p[:, 1]))
    a = np.where(flip[:, None], q, p)
    b = np.where(flip[:, None], p, q)
    return a, b, flip


def link_phases(w: Weight, p: np.ndarray, q: np.ndarray, n: float) -> np.ndarray:
    """``n * int_p^q A . dl`` for arrays of segments, exactly antisymmetric."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    a, b, flip = _canonical(p, q)
    theta = float(n) * w.line_integral(a, b)
    return np.where(flip, -theta, theta)


def link_phase(w: Weight, p, q, n: float, h: float | None = None) -> float:
    """Peierls phase of the link ``p -> q`` between adjacent grid nodes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = np.abs(q - p)
    if np.count_nonzero(d) != 1 or (h is not None and not np.isclose(d.max(), h, rtol=1e-9)):
        raise NonAdjacent(f"{tuple(p)} and {tuple(q)} are not adjacent grid nodes")
    return float(link_phases(w, p[None], q[None], n)[0])


def assemble_magnetic(g: GridDomain, w: Weight, n: float) -> OperatorMatrix:
    """Peierls discretisation of ``-[(dx + i n phi_y)^2 + (dy - i n phi_x)^2] + n lap(phi)``."""
    n = _check_scale(n)
    p, q = _all_links(g)
    pts = g.points()
    if n == 0 or w.tag == "zero":
        theta = np.zeros(len(p))
    else:
        theta = link_phases(w, pts[p], pts[q], n)
    vals = -np.exp(-1j * theta) / g.h ** 2
    m = _hermitian_csr(_laplace_diag(g, w, n).astype(complex), p, q, vals, g.N)
    return OperatorMatrix(m, "magnetic", n, g, w)


def plaquette_holonomy(g: GridDomain, w: Weight, n: float) -> tuple[np.ndarray, np.ndarray]:
    """Counter-clockwise phase sums around every unit plaquette fully in the mask.

    Returns ``(lower_left_indices, holonomy)``.
    """
    right = g.neighbor(1, 0)
    up = g.neighbor(0, 1)
    diag = g.neighbor(1, 1)
    ok = np.flatnonzero((right >= 0) & (up >= 0) & (diag >= 0))
    pts = g.points()
    a, b, c, d = pts[ok], pts[right[ok]], pts[diag[ok]], pts[up[ok]]
    hol = (link_phases(w, a, b, n) + link_phases(w, b, c, n)
           + link_phases(w, c, d, n) + link_phases(w, d, a, n))
    return ok, hol


def _cells(g: GridDomain) -> np.ndarray:
    """Lower-left integer corners of every cell touching a mask node."""
    ij = g.ij
    cand = np.concatenate([ij, ij - (1, 0), ij - (0, 1), ij - (1, 1)])
    return np.unique(cand, axis=0)


def assemble_weighted_form(g: GridDomain, w: Weight, n: float) -> GeneralizedPair:
    """Stiffness and lumped mass for ``4 int |u_z|^2 e^{2n phi} / int |u|^2 e^{2n phi}``.

    Each cell is split into two linear triangles along its rising diagonal;
    ``u_x - i u_y`` is constant on each triangle. The weight is taken at the cell
    centre and shifted by ``max phi`` so that it never exceeds one.
    """
    n = _check_scale(n)
    h = g.h
    cells = _cells(g)
    centers = np.asarray(g.origin) + h * (cells + 0.5)
    pts = g.points()
    phi_nodes = np.asarray(w.phi(pts[:, 0], pts[:, 1]), dtype=float)
    phi_cells = np.asarray(w.phi(centers[:, 0], centers[:, 1]), dtype=float)
    both = np.concatenate([phi_nodes, phi_cells])
    hi, lo = float(both.max()), float(both.min())
    if n * (hi - lo) > OVERFLOW_GUARD:
        raise WeightOverflow(f"n*(max phi - min phi) = {n * (hi - lo):.4g} exceeds {OVERFLOW_GUARD}")
    shift = hi
    wc = np.exp(2 * n * (phi_cells - shift))

    i, j = cells[:, 0], cells[:, 1]
    c00 = g.index(i, j)
    c10 = g.index(i + 1, j)
    c11 = g.index(i + 1, j + 1)
    c01 = g.index(i, j + 1)
    # Lower triangle: u_x = u10 - u00, u_y = u11 - u10; upper: u_x = u11 - u01, u_y = u01 - u00.
    # Row coefficients of (u_x - i u_y) * h.
    tri = [
        ((c10, 1.0 + 1j), (c00, -1.0), (c11, -1j)),
        ((c11, 1.0), (c01, -1.0 - 1j), (c00, 1j)),
    ]
    rows, cols, vals = [], [], []
    ncell = len(cells)
    for t, terms in enumerate(tri):
        for idx, coef in terms:
            keep = idx >= 0
            rows.append(t * ncell + np.flatnonzero(keep))
            cols.append(idx[keep])
            vals.append(np.full(keep.sum(), coef, dtype=complex))
    G = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * ncell, g.N)).tocsr()
    # Each triangle has area h^2/2 and G carries a factor h, so the h's cancel.
    tw = 0.5 * np.concatenate([wc, wc])
    A = (G.conj().T @ sp.diags(tw) @ G).tocsr()
    A = ((A + A.conj().T) * 0.5).tocsr()
    A.sort_indices()
    mass = h * h * np.exp(2 * n * (phi_nodes - shift))
    return GeneralizedPair(A, mass, shift, n, g, w)


def dump_triplets(matrix: sp.spmatrix, fh: TextIO | None = None) -> str | None:
    """Coordinate-triplet text dump, one ``row col real imag`` entry per line."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    out = fh if fh is not None else io.StringIO()
    data = np.asarray(coo.data, dtype=complex)
    for k in order:
        out.write(f"{int(coo.row[k])} {int(coo.col[k])} {float(data[k].real)!r} {float(data[k].imag)!r}\n")
    if fh is None:
        return out.getvalue()
    return None

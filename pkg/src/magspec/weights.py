"""Weights phi with analytic derivatives and the magnetic potential they induce.

Each weight carries ``phi``, its gradient and its Laplacian as vectorised
callables of ``(x, y)``. The magnetic potential is ``A = (-phi_y, phi_x)``, so
the field through a region equals the integral of ``lap`` over it. Where the
line integral of ``A`` along a straight segment has a closed form (or a
quadrature rule that is exact for it), ``link_integral`` supplies it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParams
from .grid import GridDomain

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]
LinkIntegral = Callable[[np.ndarray, np.ndarray], np.ndarray]

TAGS = ("zero", "harmonic_log", "abs2", "abs4", "flat_disc", "hol_squares")


@dataclass(frozen=True)
class Weight:
    """A real C^2 weight on the plane.

    ``grad`` returns the pair ``(phi_x, phi_y)``. ``link_integral(p, q)`` takes
    arrays of start and end points, shape ``(M, 2)``, and returns the exact
    integral of ``A . dl`` along each segment, or is ``None`` when no exact rule
    is known.
    """

    phi: Field
    grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    lap: Field
    tag: str = "custom"
    params: dict = field(default_factory=dict)
    link_integral: LinkIntegral | None = None

    def potential(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Magnetic potential ``A = (-phi_y, phi_x)``."""
        gx, gy = self.grad(x, y)
        return -gy, gx

    def midpoint_link_integral(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        q = np.atleast_2d(np.asarray(q, dtype=float))
        m = 0.5 * (p + q)
        ax, ay = self.potential(m[:, 0], m[:, 1])
        d = q - p
        return ax * d[:, 0] + ay * d[:, 1]

    def line_integral(self, p, q) -> np.ndarray:
        """Exact integral when available, midpoint rule otherwise."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if self.link_integral is not None:
            return np.asarray(self.link_integral(p, q), dtype=float)
        return self.midpoint_link_integral(p, q)


def _gauss_link_integral(potential, npts: int) -> LinkIntegral:
    """Gauss-Legendre rule on each segment; exact for polynomial ``A`` of degree < 2*npts."""
    nodes, wts = np.polynomial.legendre.leggauss(npts)
    s = 0.5 * (nodes + 1.0)
    wts = 0.5 * wts

    def integral(p, q):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        q = np.atleast_2d(np.asarray(q, dtype=float))
        d = q - p
        x = p[:, :1] + s[None, :] * d[:, :1]
        y = p[:, 1:] + s[None, :] * d[:, 1:]
        ax, ay = potential(x, y)
        return (ax * wts).sum(axis=1) * d[:, 0] + (ay * wts).sum(axis=1) * d[:, 1]

    return integral


def _zero() -> Weight:
    def phi(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def grad(x, y):
        z = phi(x, y)
        return z, z.copy()

    def link(p, q):
        return np.zeros(np.atleast_2d(p).shape[0])

    return Weight(phi, grad, phi, "zero", {}, link)


def _harmonic_log(beta: float, center: Sequence[float]) -> Weight:
    cx, cy = map(float, center)

    def phi(x, y):
        return beta * np.log(np.hypot(x - cx, y - cy))

    def grad(x, y):
        dx, dy = x - cx, y - cy
        r2 = dx * dx + dy * dy
        return beta * dx / r2, beta * dy / r2

    def lap(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def link(p, q):
        # A = beta * dtheta, so the integral is beta times the swept angle.
        p = np.atleast_2d(p) - (cx, cy)
        q = np.atleast_2d(q) - (cx, cy)
        cross = p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]
        dot = p[:, 0] * q[:, 0] + p[:, 1] * q[:, 1]
        return beta * np.arctan2(cross, dot)

    return Weight(phi, grad, lap, "harmonic_log", {"beta": beta, "center": (cx, cy)}, link)


def _abs2(scale: float) -> Weight:
    def phi(x, y):
        return scale * (x * x + y * y)

    def grad(x, y):
        return 2 * scale * x, 2 * scale * y

    def lap(x, y):
        return np.full(np.broadcast(x, y).shape, 4.0 * scale)

    w = Weight(phi, grad, lap, "abs2", {"scale": scale})
    # A is linear, so the midpoint rule is exact.
    return Weight(phi, grad, lap, "abs2", {"scale": scale}, w.midpoint_link_integral)


def _abs4(scale: float) -> Weight:
    def phi(x, y):
        return scale * (x * x + y * y) ** 2

    def grad(x, y):
        r2 = x * x + y * y
        return 4 * scale * x * r2, 4 * scale * y * r2

    def lap(x, y):
        return 16 * scale * (x * x + y * y)

    def potential(x, y):
        gx, gy = grad(x, y)
        return -gy, gx

    return Weight(phi, grad, lap, "abs4", {"scale": scale}, _gauss_link_integral(potential, 2))


def _flat_disc(r0: float, scale: float) -> Weight:
    def phi(x, y):
        s = np.maximum(np.hypot(x, y) - r0, 0.0)
        return scale * s ** 4

    def grad(x, y):
        r = np.hypot(x, y)
        s = np.maximum(r - r0, 0.0)
        # s > 0 forces r > r0 > 0, so the division is safe where it matters.
        f = np.where(s > 0, 4 * scale * s ** 3 / np.where(r > 0, r, 1.0), 0.0)
        return f * x, f * y

    def lap(x, y):
        r = np.hypot(x, y)
        s = np.maximum(r - r0, 0.0)
        return np.where(s > 0, scale * (12 * s ** 2 + 4 * s ** 3 / np.where(r > 0, r, 1.0)), 0.0)

    return Weight(phi, grad, lap, "flat_disc", {"r0": r0, "scale": scale})


def _hol_squares(coeffs: Sequence[Sequence[complex]]) -> Weight:
    # numpy polyval wants the leading coefficient first.
    polys = [np.asarray(c, dtype=complex)[::-1] for c in coeffs]
    ders = [np.polyder(p) if len(p) > 1 else np.zeros(1, dtype=complex) for p in polys]
    degree = max((len(p) - 1 for p in polys), default=0)

    def phi(x, y):
        z = x + 1j * y
        out = np.zeros(np.broadcast(x, y).shape)
        for p in polys:
            out = out + np.abs(np.polyval(p, z)) ** 2
        return out

    def phi_z(x, y):
        z = x + 1j * y
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for p, dp in zip(polys, ders):
            out = out + np.polyval(dp, z) * np.conj(np.polyval(p, z))
        return out

    def grad(x, y):
        fz = phi_z(x, y)
        return 2 * fz.real, -2 * fz.imag

    def lap(x, y):
        z = x + 1j * y
        out = np.zeros(np.broadcast(x, y).shape)
        for dp in ders:
            out = out + 4 * np.abs(np.polyval(dp, z)) ** 2
        return out

    def potential(x, y):
        gx, gy = grad(x, y)
        return -gy, gx

    params = {"coeffs": [list(map(complex, c)) for c in coeffs]}
    return Weight(phi, grad, lap, "hol_squares", params,
                  _gauss_link_integral(potential, max(degree, 1)))


def _finite(*vals) -> bool:
    return all(isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v)
               for v in vals)


def make_weight(tag: str, **params) -> Weight:
    """Build one of the builtin weights.

    ==============  ==============================  =====================
    tag             phi                             params
    ==============  ==============================  =====================
    zero            0
    harmonic_log    beta * log|z - center|          beta, center=(0, 0)
    abs2            scale * |z|^2                   scale=1
    abs4            scale * |z|^4                   scale=1
    flat_disc       scale * ((|z| - r0)_+)^4        r0, scale=1
    hol_squares     sum_j |h_j(z)|^2                coeffs (low order first)
    ==============  ==============================  =====================
    """
    try:
        if tag == "zero":
            _no_extra(params, ())
            return _zero()
        if tag == "harmonic_log":
            _no_extra(params, ("beta", "center"))
            beta = params.get("beta", 1.0)
            center = tuple(params.get("center", (0.0, 0.0)))
            if not _finite(beta, *center) or len(center) != 2:
                raise InvalidParams(f"harmonic_log needs finite beta and center, got {params}")
            return _harmonic_log(float(beta), center)
        if tag in ("abs2", "abs4"):
            _no_extra(params, ("scale",))
            scale = params.get("scale", 1.0)
            if not _finite(scale):
                raise InvalidParams(f"{tag} scale must be finite, got {scale!r}")
            return _abs2(float(scale)) if tag == "abs2" else _abs4(float(scale))
        if tag == "flat_disc":
            _no_extra(params, ("r0", "scale"))
            r0 = params.get("r0")
            scale = params.get("scale", 1.0)
            if not _finite(r0, scale) or not r0 > 0:
                raise InvalidParams(f"flat_disc needs r0 > 0, got {r0!r}")
            return _flat_disc(float(r0), float(scale))
        if tag == "hol_squares":
            _no_extra(params, ("coeffs",))
            coeffs = params.get("coeffs", [])
            cleaned = []
            for c in coeffs:
                arr = np.asarray(c, dtype=complex).ravel()
                if arr.size == 0 or not np.all(np.isfinite(arr)):
                    raise InvalidParams(f"hol_squares coefficients must be finite and nonempty, got {c!r}")
                cleaned.append(arr.tolist())
            if not cleaned:
                return _relabel(_zero(), "hol_squares", {"coeffs": []})
            return _hol_squares(cleaned)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParams):
            raise
        raise InvalidParams(f"bad parameters for {tag!r}: {exc}") from exc
    raise InvalidParams(f"unknown weight tag {tag!r}; expected one of {TAGS}")


def _no_extra(params: dict, allowed: tuple) -> None:
    extra = set(params) - set(allowed)
    if extra:
        raise InvalidParams(f"unexpected parameters {sorted(extra)}")


def _relabel(w: Weight, tag: str, params: dict) -> Weight:
    return Weight(w.phi, w.grad, w.lap, tag, params, w.link_integral)


def scaled(w: Weight, t: float) -> Weight:
    """The weight ``t * phi``."""
    t = float(t)

    def phi(x, y):
        return t * w.phi(x, y)

    def grad(x, y):
        gx, gy = w.grad(x, y)
        return t * gx, t * gy

    def lap(x, y):
        return t * w.lap(x, y)

    link = None
    if w.link_integral is not None:
        def link(p, q):
            return t * w.link_integral(p, q)

    return Weight(phi, grad, lap, w.tag, dict(w.params, t=t), link)


def default_vanishing_threshold(lap_values: np.ndarray) -> float:
    peak = float(np.max(np.abs(lap_values))) if np.size(lap_values) else 0.0
    return max(1e-9 * peak, 1e-12)


@dataclass(frozen=True)
class SubharmonicReport:
    min_lap: float
    is_subharmonic: bool
    eps: float


def subharmonicity_check(w: Weight, g: GridDomain, eps: float | None = None) -> SubharmonicReport:
    pts = g.points()
    lap = np.asarray(w.lap(pts[:, 0], pts[:, 1]), dtype=float)
    if eps is None:
        eps = default_vanishing_threshold(lap)
    min_lap = float(lap.min())
    return SubharmonicReport(min_lap, min_lap >= -eps, eps)


@dataclass(frozen=True)
class VanishingSet:
    """Mask nodes where ``|lap phi| <= eps``."""

    indices: np.ndarray
    ij: np.ndarray
    eps: float

    def __len__(self) -> int:
        return len(self.indices)


def vanishing_set(w: Weight, g: GridDomain, eps: float | None = None) -> VanishingSet:
    pts = g.points()
    lap = np.asarray(w.lap(pts[:, 0], pts[:, 1]), dtype=float)
    if eps is None:
        eps = default_vanishing_threshold(lap)
    if not eps > 0:
        raise InvalidParams(f"vanishing threshold must be positive, got {eps}")
    idx = np.flatnonzero(np.abs(lap) <= eps)
    return VanishingSet(idx, g.ij[idx], float(eps))

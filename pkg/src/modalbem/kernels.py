"""Scalar Green's function, triangle quadrature rules, and closed-form
static patch integrals used for singularity extraction.

Time convention e^{-i omega t}: the radiating kernel is e^{+ikR}/(4 pi R).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class Medium:
    """Homogeneous lossless background medium at a fixed frequency."""

    frequency: float  # Hz
    epsilon: float = constants.epsilon_0  # F/m
    mu: float = constants.mu_0  # H/m

    def __post_init__(self):
        if self.frequency <= 0 or self.epsilon <= 0 or self.mu <= 0:
            raise ValueError("frequency, epsilon and mu must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.frequency

    @property
    def k(self) -> float:
        """Wavenumber omega * sqrt(mu * epsilon), 1/m."""
        return self.omega * np.sqrt(self.mu * self.epsilon)

    @property
    def eta(self) -> float:
        """Wave impedance sqrt(mu / epsilon), Ohm."""
        return np.sqrt(self.mu / self.epsilon)

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k


@dataclass(frozen=True)
class QuadRule:
    """Symmetric quadrature rule on the reference triangle.

    points are barycentric coordinates, weights sum to 1 (unit-area
    normalization) and the rule is exact for polynomials up to `degree`.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("quadrature weights must sum to 1")


def _orbit(points, a, b=None):
    """Expand a symmetric orbit of barycentric points."""
    if b is None:
        if a is None:
            points.append((1 / 3, 1 / 3, 1 / 3))
        else:
            c = 1.0 - 2.0 * a
            points += [(c, a, a), (a, c, a), (a, a, c)]
    else:
        c = 1.0 - a - b
        points += [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _make_rule(degree, groups) -> QuadRule:
    pts, wts = [], []
    for w, a, *rest in groups:
        before = len(pts)
        _orbit(pts, a, *rest)
        wts += [w] * (len(pts) - before)
    wts = np.array(wts)
    wts /= wts.sum()  # remove round-off from truncated published digits
    return QuadRule(np.array(pts), wts, degree)


#: 3-point degree-2 rule (edge midpoints); exact for the quadratic Gram
#: integrands of linear div-conforming bases.
MIDPOINT_RULE = _make_rule(2, [(1 / 3, 0.5)])

#: 7-point degree-5 symmetric rule, the default for regular pairs.
SEVEN_POINT_RULE = _make_rule(
    5,
    [
        (0.225, None),
        (0.132394152788506, 0.470142064105115),
        (0.125939180544827, 0.101286507323456),
    ],
)

#: 16-point degree-8 symmetric rule for near (but non-touching) pairs.
SIXTEEN_POINT_RULE = _make_rule(
    8,
    [
        (0.144315607677787, None),
        (0.095091634413923, 0.459292588292723),
        (0.103217370534718, 0.170569307751760),
        (0.032458497623198, 0.050547228317031),
        (0.027230314174435, 0.263112829634638, 0.728492392955404),
    ],
)


def green(r, rp, k):
    """Scalar free-space kernel e^{ikR} / (4 pi R); broadcasts over inputs."""
    d = np.asarray(r, dtype=np.float64) - np.asarray(rp, dtype=np.float64)
    R = np.linalg.norm(d, axis=-1)
    if np.any(R == 0):
        raise ValueError("green() evaluated at coincident points")
    return np.exp(1j * k * R) / (FOUR_PI * R)


def grad_green(r, rp, k):
    """Gradient with respect to the field point r of e^{ikR}/(4 pi R)."""
    d = np.asarray(r, dtype=np.float64) - np.asarray(rp, dtype=np.float64)
    R = np.linalg.norm(d, axis=-1)
    if np.any(R == 0):
        raise ValueError("grad_green() evaluated at coincident points")
    g = np.exp(1j * k * R) / (FOUR_PI * R)
    return ((1j * k * R - 1.0) * g / R**2)[..., None] * d


def green_smooth(R, k):
    """(e^{ikR} - 1 - ikR) / (4 pi R): the kernel after subtracting the two
    leading Taylor terms; bounded as R -> 0."""
    R = np.asarray(R, dtype=np.float64)
    x = 1j * k * R
    out = np.empty(np.shape(R), dtype=np.complex128)
    small = np.abs(x) < 1e-4
    Rs, xs = R[small], x[small]
    # series keeps full relative accuracy where the direct form cancels
    out[small] = (-(k**2) * Rs / 2 + xs**2 * (1j * k) / 6 + xs**3 * (1j * k) / 24) / FOUR_PI
    xl = x[~small]
    out[~small] = (np.exp(xl) - 1.0 - xl) / (FOUR_PI * R[~small])
    return out


def grad_green_smooth_radial(R, k):
    """d/dR of green_smooth: the radial factor of the extracted gradient
    kernel, bounded as R -> 0 (limit -k^2 / 8 pi)."""
    R = np.asarray(R, dtype=np.float64)
    x = 1j * k * R
    out = np.empty(np.shape(R), dtype=np.complex128)
    small = np.abs(x) < 1e-4
    Rs, xs = R[small], x[small]
    out[small] = (-(k**2) / 2 - 1j * k**3 * Rs / 3 - xs**2 * k**2 / 8) / FOUR_PI
    xl = x[~small]
    out[~small] = (np.exp(xl) * (xl - 1.0) + 1.0) / (FOUR_PI * R[~small] ** 2)
    return out


@dataclass(frozen=True)
class PatchMoments:
    """Closed-form static integrals of a flat triangle seen from a point."""

    one_over_r: np.ndarray  # int 1/R dA'
    rp_over_r: np.ndarray  # int r'/R dA'  (3-vector)
    grad_one_over_r: np.ndarray  # int (r - r')/R^3 dA'  (3-vector)


def singular_patch_integrals(tri, r) -> PatchMoments:
    """Analytic static moments of a triangle patch.

    tri: (..., 3, 3) triangle vertices; r: (..., 3) observation points
    (broadcastable).  All moments are finite for r on the triangle (the
    normal part of grad_one_over_r is the principal value there).
    """
    tri = np.asarray(tri, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    shape = np.broadcast_shapes(tri.shape[:-2], r.shape[:-1])
    tri = np.broadcast_to(tri, shape + (3, 3))
    r = np.broadcast_to(r, shape + (3,))

    e01 = tri[..., 1, :] - tri[..., 0, :]
    e02 = tri[..., 2, :] - tri[..., 0, :]
    nrm = np.cross(e01, e02)
    two_area = np.linalg.norm(nrm, axis=-1)
    n_hat = nrm / two_area[..., None]
    scale = np.sqrt(two_area)

    w0 = np.einsum("...i,...i->...", r - tri[..., 0, :], n_hat)
    rho = r - w0[..., None] * n_hat

    I0 = np.zeros(shape)
    Iplane = np.zeros(shape + (3,))
    Igrad_plane = np.zeros(shape + (3,))
    beta_sum = np.zeros(shape)

    for i in range(3):
        p1 = tri[..., i, :]
        p2 = tri[..., (i + 1) % 3, :]
        s_len = np.linalg.norm(p2 - p1, axis=-1)
        s_hat = (p2 - p1) / s_len[..., None]
        m_hat = np.cross(s_hat, n_hat)

        t0 = np.einsum("...i,...i->...", p1 - rho, m_hat)
        s_minus = np.einsum("...i,...i->...", p1 - rho, s_hat)
        s_plus = np.einsum("...i,...i->...", p2 - rho, s_hat)
        R_minus = np.linalg.norm(r - p1, axis=-1)
        R_plus = np.linalg.norm(r - p2, axis=-1)
        R0sq = t0**2 + w0**2

        # the integrand is genuinely singular only when the observation
        # point lies on the open edge segment itself
        on_line = R0sq < (1e-13 * scale) ** 2
        on_segment = on_line & (s_minus < 0) & (s_plus > 0)

        # log term, branch chosen to avoid cancellation
        use_pos = (s_plus + s_minus) > 0
        num = np.where(use_pos, R_plus + s_plus, R_minus - s_minus)
        den = np.where(use_pos, R_minus + s_minus, R_plus - s_plus)
        den = np.where(on_segment | (den <= 0), 1.0, den)
        num = np.where(on_segment | (num <= 0), 1.0, num)
        f2 = np.log(num / den)

        den_plus = R0sq + np.abs(w0) * R_plus
        den_minus = R0sq + np.abs(w0) * R_minus
        # observation at an endpoint gives 0/0 with limit 0 (t0 -> 0 there)
        with np.errstate(invalid="ignore", divide="ignore"):
            beta = np.where(
                den_plus > 0, np.arctan(t0 * s_plus / den_plus), 0.0
            ) - np.where(
                den_minus > 0, np.arctan(t0 * s_minus / den_minus), 0.0
            )
        beta = np.where(on_segment, 0.0, beta)

        line_R = 0.5 * (s_plus * R_plus - s_minus * R_minus) + 0.5 * R0sq * f2

        I0 += np.where(on_line, 0.0, t0 * f2) - np.abs(w0) * beta
        Iplane += m_hat * line_R[..., None]
        Igrad_plane += m_hat * f2[..., None]
        beta_sum += beta

    rp_over_r = rho * I0[..., None] + Iplane
    # deterministic principal value for in-plane observation points
    w0_sign = np.where(np.abs(w0) < 1e-12 * scale, 0.0, np.sign(w0))
    grad = Igrad_plane + n_hat * (w0_sign * beta_sum)[..., None]
    return PatchMoments(I0, rp_over_r, grad)

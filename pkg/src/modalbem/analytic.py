"""Analytic sphere references: characteristic values from Riccati-Bessel
ratios, interior cavity resonances from their roots, and PEC Mie-series
radar cross sections.  Used for validation only; independent of the
boundary-element code paths.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import spherical_jn, spherical_yn


def riccati_j(l: int, x):
    """x j_l(x) and its derivative."""
    x = np.asarray(x, dtype=np.float64)
    val = x * spherical_jn(l, x)
    dval = spherical_jn(l, x) + x * spherical_jn(l, x, derivative=True)
    return val, dval


def riccati_y(l: int, x):
    """x y_l(x) and its derivative."""
    x = np.asarray(x, dtype=np.float64)
    val = x * spherical_yn(l, x)
    dval = spherical_yn(l, x) + x * spherical_yn(l, x, derivative=True)
    return val, dval


def sphere_char_values(ka: float, l_max: int):
    """Characteristic values of a PEC sphere, by spherical-harmonic order.

    Returns a list of (lam, multiplicity, kind) with kind 'TE' or 'TM':
      TE_l: lam = -Y_l(ka)/J_l(ka)        (Riccati-Bessel functions)
      TM_l: lam = -Y_l'(ka)/J_l'(ka)
    each (2l+1)-fold degenerate.
    """
    out = []
    for l in range(1, l_max + 1):
        jv, jd = riccati_j(l, ka)
        yv, yd = riccati_y(l, ka)
        out.append((-float(yv / jv), 2 * l + 1, "TE"))
        out.append((-float(yd / jd), 2 * l + 1, "TM"))
    return sorted(out, key=lambda t: abs(t[0]))


def sphere_resonance_ka(kind: str, l: int, root: int = 1) -> float:
    """ka of the interior cavity resonance: root of J_l (TE) or J_l' (TM).

    root=1 is the lowest nontrivial root.
    """
    if kind == "TE":
        f = lambda x: riccati_j(l, x)[0]
    elif kind == "TM":
        f = lambda x: riccati_j(l, x)[1]
    else:
        raise ValueError("kind must be 'TE' or 'TM'")
    found = []
    xs = np.linspace(0.05, l + 40.0, 4000)
    fs = np.array([float(f(x)) for x in xs])
    for i in range(len(xs) - 1):
        if fs[i] == 0.0:
            found.append(xs[i])
        elif fs[i] * fs[i + 1] < 0:
            found.append(brentq(lambda x: float(f(x)), xs[i], xs[i + 1]))
        if len(found) >= root:
            return found[root - 1]
    raise RuntimeError("root not bracketed")


def _pec_mie_coeffs(x: float, n_max: int):
    n = np.arange(1, n_max + 1)
    jv = np.array([riccati_j(l, x) for l in n])
    yv = np.array([riccati_y(l, x) for l in n])
    h = jv[:, 0] + 1j * yv[:, 0]
    hd = jv[:, 1] + 1j * yv[:, 1]
    a = jv[:, 1] / hd
    b = jv[:, 0] / h
    return a, b


def _n_terms(x: float) -> int:
    return int(np.ceil(x + 4.05 * x ** (1 / 3) + 10))


def mie_backscatter_rcs(radius: float, k: float) -> float:
    """Monostatic RCS (m^2) of a PEC sphere."""
    x = k * radius
    a, b = _pec_mie_coeffs(x, _n_terms(x))
    n = np.arange(1, len(a) + 1)
    s = np.sum((-1.0) ** n * (2 * n + 1) * (a - b))
    lam = 2 * np.pi / k
    return float(lam**2 / (4 * np.pi) * np.abs(s) ** 2)


def mie_bistatic_rcs(radius: float, k: float, theta, plane: str) -> np.ndarray:
    """Bistatic RCS (m^2) of a PEC sphere vs scattering angle theta
    (radians from forward).  plane='e' gives the E-plane cut (|S2|^2),
    plane='h' the H-plane cut (|S1|^2)."""
    x = k * radius
    nmax = _n_terms(x)
    a, b = _pec_mie_coeffs(x, nmax)
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    mu = np.cos(theta)

    pi_n = np.zeros((nmax, len(mu)))
    tau_n = np.zeros((nmax, len(mu)))
    pi_prev = np.zeros_like(mu)  # pi_0
    pi_cur = np.ones_like(mu)  # pi_1
    for n in range(1, nmax + 1):
        pi_n[n - 1] = pi_cur
        tau_n[n - 1] = n * mu * pi_cur - (n + 1) * pi_prev
        if n < nmax:
            pi_next = ((2 * n + 1) * mu * pi_cur - (n + 1) * pi_prev) / n
            pi_prev, pi_cur = pi_cur, pi_next

    n = np.arange(1, nmax + 1)[:, None]
    w = (2 * n + 1) / (n * (n + 1))
    S1 = np.sum(w * (a[:, None] * pi_n + b[:, None] * tau_n), axis=0)
    S2 = np.sum(w * (a[:, None] * tau_n + b[:, None] * pi_n), axis=0)
    S = S2 if plane == "e" else S1
    return 4 * np.pi / k**2 * np.abs(S) ** 2

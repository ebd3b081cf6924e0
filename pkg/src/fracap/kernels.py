"""Fractional heat kernel family and its singular derivatives.

The kernel of order s in (1/2, 1] is normalized so that its spatial Fourier
transform (angular-frequency convention) at time t is exp(-t |xi|^(2s)).
Consequences used everywhere downstream:

* unit spatial mass: integral of the kernel over x is 1 for every t > 0;
* self-similarity: kernel(x, t) = t^(-n/(2s)) phi(|x| t^(-1/(2s))) for t > 0,
  where phi = phi_{n,s} is the radial profile of the inverse Fourier
  transform of exp(-|eta|^(2s));
* exact branches: phi(rho) = (4 pi)^(-n/2) exp(-rho^2/4) at s = 1, and the
  Poisson/Cauchy profile c_n (1 + rho^2)^(-(n+1)/2) at s = 1/2 (the s = 1/2
  case sits outside the capacity range and is kept as a quadrature-validation
  branch).

For 1/2 < s < 1 the profile is evaluated by reducing the inverse transform
to a one-dimensional Hankel-type integral

    phi(rho) = (2 pi)^(-n/2) rho^(1 - n/2)
               * int_0^inf exp(-r^(2s)) J_{n/2-1}(rho r) r^(n/2) dr,

integrated by fixed Gauss-Legendre panels no wider than a half oscillation
period, with geometric grading toward r = 0 where exp(-r^(2s)) loses
smoothness. Values are tabulated on [0, rho_max] with a cubic spline and a
fitted power tail A rho^(-(n+2s)) beyond; an independent adaptive-quadrature
path (`phi_profile_quad`) is retained as the oracle. Tables can be cached on
disk as CSV under FRACAP_CACHE_DIR.

The fractional time derivative kernel is the order-1/(2s) integral
derivative of t -> kernel(x, t), computed by adaptive quadrature with the
singular point split out; the half-Laplacian of the classical heat kernel
(n = 1) is t^(-1) g(x t^(-1/2)) with g tabulated once from the
principal-value integral g(z) = pv int (f(z) - f(z-y)) / y^2 dy,
f(z) = exp(-z^2/4).
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import beta as beta_fn
from scipy.special import gamma as gamma_fn
from scipy.special import j0, j1, jv

from .errors import KernelDomainError, QuadratureError
from .psgeo import PsPoint

__all__ = [
    "QuadratureConfig",
    "KernelSpec",
    "phi_profile",
    "phi_profile_deriv",
    "phi_profile_quad",
    "phi_profile_deriv_quad",
    "phi_zero",
    "ps_kernel",
    "grad_ps_kernel",
    "dt_frac_ps_kernel",
    "heat_kernel",
    "grad_heat_kernel",
    "half_lap_heat_kernel",
    "half_lap_profile",
    "half_lap_profile_quad",
    "kernel_values",
    "kernel_component_count",
    "spatial_mass",
    "get_phi_table",
    "clear_table_caches",
]

FAMILIES = ("Ps", "GradPs", "DtFracPs", "W", "GradW", "HalfLapW")

_ORIGIN_EPS = 1e-8   # ps-distance below which the singular kernels refuse to evaluate


def _quad(f, a, b, **kw):
    # QUADPACK's advisory warnings are redundant here: every call site checks
    # the returned error estimate and raises QuadratureError itself
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, **kw)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_panels: int = 400
    profile_table_size: int = 2048
    profile_rho_max: float = 60.0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.profile_rho_max <= 0 or self.profile_table_size < 16:
            raise ValueError("profile table must cover [0, rho_max] with >= 16 nodes")


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True)
class KernelSpec:
    """Selects a kernel family with its quadrature parameters.

    W, GradW and HalfLapW are the classical-heat (s = 1) objects; HalfLapW
    additionally requires n = 1. The fractional families accept s in
    (1/2, 1], falling back to the exact Gaussian branch at s = 1.
    """

    family: str
    n: int = 1
    s: float = 1.0
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; "
                             f"expected one of {FAMILIES}")
        if self.n < 1:
            raise ValueError("spatial dimension n must be >= 1")
        if self.family in ("W", "GradW", "HalfLapW"):
            if self.s != 1.0:
                raise ValueError(f"{self.family} requires s = 1")
            if self.family == "HalfLapW" and self.n != 1:
                raise ValueError("HalfLapW is implemented for n = 1 only")
        else:
            if not (0.5 < self.s <= 1.0):
                raise ValueError(f"fractional families require 1/2 < s <= 1, got s={self.s}")


# ---------------------------------------------------------------------------
# radial profile phi_{n,s}
# ---------------------------------------------------------------------------

def phi_zero(n: int, s: float) -> float:
    """phi_{n,s}(0) = (2pi)^-n * surf(S^{n-1}) * Gamma(n/(2s)) / (2s), exactly."""
    surf = 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)
    return (2.0 * math.pi) ** (-n) * surf * gamma_fn(n / (2.0 * s)) / (2.0 * s)


def _phi_exact_s1(rho, n):
    return (4.0 * math.pi) ** (-n / 2.0) * np.exp(-np.square(rho) / 4.0)


def _dphi_exact_s1(rho, n):
    return -(np.asarray(rho) / 2.0) * _phi_exact_s1(rho, n)


def _phi_exact_half(rho, n):
    c = gamma_fn((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0)
    return c * (1.0 + np.square(rho)) ** (-(n + 1) / 2.0)


def _dphi_exact_half(rho, n):
    c = gamma_fn((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0)
    rho = np.asarray(rho)
    return -c * (n + 1) * rho * (1.0 + np.square(rho)) ** (-(n + 3) / 2.0)


def _r_cutoff(s: float, tol: float) -> float:
    # exp(-R^(2s)) below tol/100 makes the truncated tail irrelevant
    return (-math.log(max(tol, 1e-300) * 1e-2)) ** (1.0 / (2.0 * s))


def _hankel_integrand(r, rho, n, s, deriv):
    """Integrand of the reduced radial transform, prefactor excluded."""
    e = np.exp(-r ** (2.0 * s))
    z = rho * r
    if not deriv:
        nu = n / 2.0 - 1.0
        if n == 1:
            return e * np.cos(z) * math.sqrt(2.0 / math.pi)  # J_{-1/2} folded
        if n == 2:
            return e * j0(z) * r
        return e * jv(nu, z) * r ** (n / 2.0)
    nu = n / 2.0
    if n == 1:
        return e * np.sin(z) * r * math.sqrt(2.0 / math.pi)
    if n == 2:
        return e * j1(z) * r ** 2
    return e * jv(nu, z) * r ** (n / 2.0 + 1.0)


def _hankel_prefactor(rho, n, deriv):
    # for n = 1 the sqrt(2/(pi rho r)) of J_{+-1/2} is split between the
    # integrand (r part) and this prefactor (rho part folds to 1/pi)
    if n == 1:
        pref = 1.0 / math.pi / math.sqrt(2.0 / math.pi)
    elif n == 2:
        pref = 1.0 / (2.0 * math.pi)
    else:
        pref = (2.0 * math.pi) ** (-n / 2.0) * rho ** (1.0 - n / 2.0)
    return -pref if deriv else pref


def phi_profile_quad(rho: float, n: int, s: float,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Direct adaptive quadrature of the profile; the oracle path.

    Accepts the full validation range s in [1/2, 1]. Slower than the table
    path by orders of magnitude; raises QuadratureError when the adaptive
    integrator cannot certify the requested tolerance.
    """
    return _phi_quad_impl(float(rho), n, float(s), cfg, deriv=False)


def phi_profile_deriv_quad(rho: float, n: int, s: float,
                           cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    return _phi_quad_impl(float(rho), n, float(s), cfg, deriv=True)


def _phi_quad_impl(rho, n, s, cfg, deriv):
    if rho < 0:
        raise ValueError("rho must be >= 0")
    if not (0.5 <= s <= 1.0):
        raise ValueError("profile quadrature supports s in [1/2, 1]")
    if rho == 0.0:
        return 0.0 if deriv else phi_zero(n, s)
    R = _r_cutoff(s, cfg.abs_tol)

    def f(r):
        return _hankel_integrand(r, rho, n, s, deriv)

    if n == 1:
        # QUADPACK's oscillatory rule takes the cos/sin factor as a weight.
        kind = "sin" if deriv else "cos"
        amp = math.sqrt(2.0 / math.pi)

        def f_sm(r):
            w = r if deriv else 1.0
            return np.exp(-r ** (2.0 * s)) * w * amp

        v1, e1 = _quad(f_sm, 0.0, 1.0, weight=kind, wvar=rho,
                                epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                limit=cfg.max_panels)
        v2, e2 = _quad(f_sm, 1.0, R, weight=kind, wvar=rho,
                                epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                limit=cfg.max_panels)
    else:
        v1, e1 = _quad(f, 0.0, 1.0, epsabs=cfg.abs_tol,
                                epsrel=cfg.rel_tol, limit=cfg.max_panels)
        v2, e2 = _quad(f, 1.0, R, epsabs=cfg.abs_tol,
                                epsrel=cfg.rel_tol, limit=cfg.max_panels)
    val = v1 + v2
    err = e1 + e2
    if err > 100.0 * max(cfg.abs_tol, abs(val) * cfg.rel_tol, 1e-15):
        raise QuadratureError(
            f"profile quadrature failed at rho={rho:g}, n={n}, s={s:g}",
            achieved=err)
    pref = _hankel_prefactor(rho, n, deriv)
    return pref * val


# --- vectorized fixed-panel scheme used to build tables --------------------

def _panel_grid(rho_max: float, s: float, tol: float):
    """Shared Gauss-Legendre nodes for all rho in [0, rho_max].

    Panels are capped at a half period pi/rho_max; [0, w0] is geometrically
    refined because exp(-r^(2s)) is only Holder-smooth at 0.
    """
    R = _r_cutoff(s, tol)
    w0 = min(math.pi / max(rho_max, 1.0), R / 24.0)
    edges = [w0 * 2.0 ** (-j) for j in range(46, -1, -1)]
    k = 1
    while w0 * (k + 1) <= R:
        k += 1
        edges.append(w0 * k)
    if edges[-1] < R:
        edges.append(R)
    edges = np.asarray(edges)
    gx, gw = leggauss(16)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()
    return nodes, weights


def _phi_values_vectorized(rhos, n, s, cfg, deriv):
    nodes, weights = _panel_grid(cfg.profile_rho_max, s, cfg.abs_tol)
    e = np.exp(-nodes ** (2.0 * s))
    if not deriv:
        radial = e * (math.sqrt(2.0 / math.pi) if n == 1 else
                      nodes if n == 2 else nodes ** (n / 2.0))
    else:
        radial = e * (nodes * math.sqrt(2.0 / math.pi) if n == 1 else
                      nodes ** 2 if n == 2 else nodes ** (n / 2.0 + 1.0))
    out = np.empty_like(rhos)
    block = 256
    for i0 in range(0, rhos.size, block):
        rb = rhos[i0:i0 + block]
        z = rb[:, None] * nodes[None, :]
        if n == 1:
            osc = np.sin(z) if deriv else np.cos(z)
        elif n == 2:
            osc = j1(z) if deriv else j0(z)
        else:
            osc = jv(n / 2.0 if deriv else n / 2.0 - 1.0, z)
        out[i0:i0 + block] = (osc * radial[None, :]) @ weights
    pref = np.array([_hankel_prefactor(r, n, deriv) if r > 0 else 0.0
                     for r in rhos])
    vals = pref * out
    zero_mask = rhos == 0.0
    if np.any(zero_mask):
        vals[zero_mask] = 0.0 if deriv else phi_zero(n, s)
    return vals


@dataclass
class PhiTable:
    """Splined profile values with a fitted power tail beyond rho_max."""

    n: int
    s: float
    rho: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    rho_max: float
    _sp_phi: CubicSpline = field(repr=False, default=None)
    _sp_dphi: CubicSpline = field(repr=False, default=None)

    def __post_init__(self):
        if self._sp_phi is None:
            self._sp_phi = CubicSpline(self.rho, self.phi)
            self._sp_dphi = CubicSpline(self.rho, self.dphi)
        # tail exponents come from the stable-density expansion
        # phi ~ A rho^-(n+2s) + B rho^-(n+4s); A, B matched to the table-edge
        # value and slope so the tail is C^1-continuous
        p = self.n + 2.0 * self.s
        q = self.n + 4.0 * self.s
        R, v, d = self.rho_max, self.phi[-1], self.dphi[-1]
        self._tail_p, self._tail_q = p, q
        self._amp_phi = R ** p * (q * v + R * d) / (q - p)
        self._amp_phi2 = (v - self._amp_phi * R ** (-p)) * R ** q
        # derivative tail from the same two-term model
        self._amp_dphi = -p * self._amp_phi
        self._amp_dphi2 = -q * self._amp_phi2

    def phi_at(self, rho):
        shp = np.shape(rho)
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.empty_like(rho)
        inside = rho <= self.rho_max
        out[inside] = self._sp_phi(rho[inside])
        if np.any(~inside):
            ro = rho[~inside]
            out[~inside] = (self._amp_phi * ro ** (-self._tail_p)
                            + self._amp_phi2 * ro ** (-self._tail_q))
        return out.reshape(shp)

    def dphi_at(self, rho):
        shp = np.shape(rho)
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.empty_like(rho)
        inside = rho <= self.rho_max
        out[inside] = self._sp_dphi(rho[inside])
        if np.any(~inside):
            ro = rho[~inside]
            out[~inside] = (self._amp_dphi * ro ** (-self._tail_p - 1.0)
                            + self._amp_dphi2 * ro ** (-self._tail_q - 1.0))
        return out.reshape(shp)

    def tail_mass(self) -> float:
        """Spatial integral of the tail model beyond rho_max."""
        return (self._amp_phi * self.rho_max ** (-2.0 * self.s) / (2.0 * self.s)
                + self._amp_phi2 * self.rho_max ** (-4.0 * self.s) / (4.0 * self.s))

    def spatial_mass(self) -> float:
        """Integral of the kernel over space at any fixed t > 0."""
        n = self.n
        surf = 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)
        poly = CubicSpline(self.rho, self.phi * self.rho ** (n - 1))
        inner = poly.integrate(0.0, self.rho_max)
        return float(surf * (inner + self.tail_mass()))


_PHI_CACHE: dict = {}
_G_CACHE: dict = {}
_DTFRAC_CACHE: dict = {}


def clear_table_caches():
    _PHI_CACHE.clear()
    _G_CACHE.clear()
    _DTFRAC_CACHE.clear()


def _cache_key(n, s, cfg):
    return (n, round(float(s), 12), cfg.abs_tol, cfg.profile_rho_max,
            cfg.profile_table_size)


def _disk_cache_file(kind, n, s, cfg):
    root = os.environ.get("FRACAP_CACHE_DIR")
    if not root:
        return None
    name = (f"{kind}_n{n}_s{s:.6g}_tol{cfg.abs_tol:.3g}"
            f"_rmax{cfg.profile_rho_max:g}_N{cfg.profile_table_size}.csv")
    return os.path.join(root, name)


def _save_table_csv(path, kind, n, s, cfg, rho, values):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# fracap profile table v1\n")
        fh.write(f"# kind={kind} n={n} s={s:.12g} tol={cfg.abs_tol:.6g} "
                 f"rho_max={cfg.profile_rho_max:.12g} "
                 f"size={cfg.profile_table_size}\n")
        fh.write("rho,value\n")
        for r, v in zip(rho, values):
            fh.write(f"{r!r},{v!r}\n")


def _load_table_csv(path, kind, n, s, cfg):
    try:
        with open(path) as fh:
            head = fh.readline()
            meta = fh.readline()
            if "fracap profile table v1" not in head:
                return None
            expect = (f"kind={kind} n={n} s={s:.12g} tol={cfg.abs_tol:.6g} "
                      f"rho_max={cfg.profile_rho_max:.12g} "
                      f"size={cfg.profile_table_size}")
            if expect not in meta:
                return None
            data = np.loadtxt(fh, delimiter=",", skiprows=1)
    except (OSError, ValueError):
        return None
    if data.ndim != 2 or data.shape[0] != cfg.profile_table_size:
        return None
    return data[:, 0], data[:, 1]


def get_phi_table(n: int, s: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> PhiTable:
    key = _cache_key(n, s, cfg)
    tab = _PHI_CACHE.get(key)
    if tab is not None:
        return tab
    rho = np.linspace(0.0, cfg.profile_rho_max, cfg.profile_table_size)
    loaded = None
    fp = _disk_cache_file("phi", n, s, cfg)
    fd = _disk_cache_file("dphi", n, s, cfg)
    if fp and fd:
        got_p = _load_table_csv(fp, "phi", n, s, cfg)
        got_d = _load_table_csv(fd, "dphi", n, s, cfg)
        if got_p is not None and got_d is not None:
            loaded = (got_p[1], got_d[1])
            rho = got_p[0]
    if loaded is not None:
        phi, dphi = loaded
    elif s == 1.0:
        phi, dphi = _phi_exact_s1(rho, n), _dphi_exact_s1(rho, n)
    elif s == 0.5:
        phi, dphi = _phi_exact_half(rho, n), _dphi_exact_half(rho, n)
    else:
        phi = _phi_values_vectorized(rho, n, s, cfg, deriv=False)
        dphi = _phi_values_vectorized(rho, n, s, cfg, deriv=True)
        if fp and fd:
            _save_table_csv(fp, "phi", n, s, cfg, rho, phi)
            _save_table_csv(fd, "dphi", n, s, cfg, rho, dphi)
    tab = PhiTable(n=n, s=float(s), rho=rho, phi=np.asarray(phi),
                   dphi=np.asarray(dphi), rho_max=float(cfg.profile_rho_max))
    _PHI_CACHE[key] = tab
    return tab


def phi_profile(rho, n: int, s: float,
                cfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """Radial kernel profile; exact at s in {1, 1/2}, table-backed otherwise.

    Accepts scalars or arrays; nonnegative rho required.
    """
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0):
        raise ValueError("rho must be >= 0")
    if s == 1.0:
        out = _phi_exact_s1(arr, n)
    elif s == 0.5:
        out = _phi_exact_half(arr, n)
    else:
        out = get_phi_table(n, s, cfg).phi_at(arr)
    return float(out) if np.isscalar(rho) else out


def phi_profile_deriv(rho, n: int, s: float,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE):
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0):
        raise ValueError("rho must be >= 0")
    if s == 1.0:
        out = _dphi_exact_s1(arr, n)
    elif s == 0.5:
        out = _dphi_exact_half(arr, n)
    else:
        out = get_phi_table(n, s, cfg).dphi_at(arr)
    return float(out) if np.isscalar(rho) else out


# ---------------------------------------------------------------------------
# point kernels
# ---------------------------------------------------------------------------

def _require_family(spec: KernelSpec, family: str):
    if spec.family != family:
        raise ValueError(f"kernel spec has family {spec.family!r}, "
                         f"operation requires {family!r}")


def ps_kernel(p: PsPoint, spec: KernelSpec) -> float:
    """Fractional heat kernel value; 0 for t <= 0."""
    _require_family(spec, "Ps")
    if p.t <= 0.0:
        return 0.0
    tpow = p.t ** (-1.0 / (2.0 * spec.s))
    rho = float(np.linalg.norm(p.x)) * tpow
    return p.t ** (-spec.n / (2.0 * spec.s)) * float(
        phi_profile(rho, spec.n, spec.s, spec.quadrature))


def grad_ps_kernel(p: PsPoint, spec: KernelSpec) -> np.ndarray:
    """Spatial gradient of the fractional heat kernel; zero vector for t <= 0
    and at x = 0 (oddness)."""
    _require_family(spec, "GradPs")
    if p.t <= 0.0:
        return np.zeros(spec.n)
    r = float(np.linalg.norm(p.x))
    if r < 1e-12:
        return np.zeros(spec.n)
    tpow = p.t ** (-1.0 / (2.0 * spec.s))
    rho = r * tpow
    dphi = float(phi_profile_deriv(rho, spec.n, spec.s, spec.quadrature))
    amp = p.t ** (-(spec.n + 1.0) / (2.0 * spec.s)) * dphi
    return amp * (p.x / r)


def heat_kernel(p: PsPoint) -> float:
    """Classical Gaussian heat kernel (4 pi t)^(-n/2) exp(-|x|^2/(4t)), t > 0."""
    if p.t <= 0.0:
        return 0.0
    n = p.n
    return (4.0 * math.pi * p.t) ** (-n / 2.0) * math.exp(
        -float(p.x @ p.x) / (4.0 * p.t))


def grad_heat_kernel(p: PsPoint) -> np.ndarray:
    if p.t <= 0.0:
        return np.zeros(p.n)
    return (-p.x / (2.0 * p.t)) * heat_kernel(p)


# --- fractional time derivative --------------------------------------------

def _time_section(tau, xnorm, n, s, cfg):
    """kernel(x, tau) as a function of tau for fixed |x| (vectorized)."""
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    pos = tau > 0.0
    if np.any(pos):
        tp = tau[pos]
        rho = xnorm * tp ** (-1.0 / (2.0 * s))
        out[pos] = tp ** (-n / (2.0 * s)) * phi_profile(rho, n, s, cfg)
    return out


def dt_frac_ps_kernel(p: PsPoint, spec: KernelSpec) -> float:
    """Fractional time derivative of the heat kernel,
    int (kernel(x,tau) - kernel(x,t)) / |tau - t|^(1 + 1/(2s)) dtau.

    Adaptive quadrature split at tau = t (symmetric-difference window of
    half-width h cancels the leading singularity) and at the tau = 0 kink.
    Refuses to evaluate within ps-distance 1e-8 of the space-time origin,
    and on the ray {x = 0, t < 0} for n >= 2s where the integral diverges.
    """
    _require_family(spec, "DtFracPs")
    n, s, cfg = spec.n, spec.s, spec.quadrature
    alpha = 1.0 / (2.0 * s)
    xnorm = float(np.linalg.norm(p.x))
    t = p.t
    scale = max(xnorm, abs(t) ** alpha)
    if scale < _ORIGIN_EPS:
        raise KernelDomainError(
            f"dt-frac kernel is singular at the origin (ps-norm {scale:g})")
    if xnorm < _ORIGIN_EPS * scale and t <= 0.0 and n / (2.0 * s) >= 1.0:
        raise KernelDomainError(
            "dt-frac kernel diverges on the ray x=0, t<=0 for n >= 2s")

    def F(tau):
        return float(_time_section(np.asarray([tau]), xnorm, n, s, cfg)[0])

    epsabs = cfg.abs_tol * max(1.0, scale ** (-(n + 1.0)))
    opts = dict(epsabs=epsabs, epsrel=cfg.rel_tol, limit=cfg.max_panels)

    if t > 0.0:
        Ft = F(t)
        h = min(1e-3 * max(t, xnorm ** (2.0 * s)), 0.5 * t)
        # second difference of F: O(u^2) at u = 0, so the window integrand is
        # integrable; below u0 the quadratic model avoids cancellation noise
        u0 = 1e-2 * h

        def win(u):
            return (F(t + u) + F(t - u) - 2.0 * Ft) / u ** (1.0 + alpha)

        head = (F(t + u0) + F(t - u0) - 2.0 * Ft) * u0 ** (-alpha) / (2.0 - alpha)
        pts1 = [xnorm ** (2.0 * s)] if 0.0 < xnorm ** (2.0 * s) < t - h else None
        v1, e1 = _quad(lambda tau: F(tau) * (t - tau) ** (-1.0 - alpha),
                       0.0, t - h, points=pts1, **opts)
        v2, e2 = _quad(win, u0, h, **opts)
        v3, e3 = _quad(lambda tau: F(tau) * (tau - t) ** (-1.0 - alpha),
                       t + h, np.inf, **opts)
        val = v1 + v2 + v3 + head - 2.0 * Ft * h ** (-alpha) / alpha
        errs = [e1, e2, e3]
    elif t < 0.0:
        if xnorm > 0.0:
            split = xnorm ** (2.0 * s)
            v1, e1 = _quad(
                lambda tau: F(tau) * (tau - t) ** (-1.0 - alpha), 0.0, split, **opts)
            v2, e2 = _quad(
                lambda tau: F(tau) * (tau - t) ** (-1.0 - alpha), split, np.inf, **opts)
            val, errs = v1 + v2, [e1, e2]
        else:
            # x = 0, n < 2s: F(tau) = phi(0) tau^(-beta), and the integral is
            # a Beta function: phi(0) |t|^(-beta-alpha) B(1-beta, alpha+beta)
            beta = n / (2.0 * s)
            val = (phi_zero(n, s) * abs(t) ** (-beta - alpha)
                   * beta_fn(1.0 - beta, alpha + beta))
            errs = [0.0]
    else:
        # t = 0, x != 0: integrand ~ tau^(-alpha) at 0; F(tau)/tau tends to
        # the tail amplitude A |x|^(-(n+2s)), supplied explicitly because the
        # endpoint-weight rule samples tau = 0
        split = xnorm ** (2.0 * s)
        if s == 1.0:
            lim0 = 0.0
        else:
            tab = get_phi_table(n, s, cfg)
            lim0 = tab._amp_phi * xnorm ** (-(n + 2.0 * s))

        def head_f(tau):
            return F(tau) / tau if tau > 0.0 else lim0

        v1, e1 = _quad(head_f, 0.0, split, weight="alg", wvar=(-alpha, 0.0), **opts)
        v2, e2 = _quad(lambda tau: F(tau) * tau ** (-1.0 - alpha),
                       split, np.inf, **opts)
        val, errs = v1 + v2, [e1, e2]

    total_err = float(np.sum(errs))
    if total_err > 1e-4 * max(1.0, abs(val)) + 100.0 * epsabs:
        raise QuadratureError(
            f"dt-frac quadrature failed at |x|={xnorm:g}, t={t:g}",
            achieved=total_err)
    return val


# --- half-Laplacian of the heat kernel (n = 1) ------------------------------

def _gauss_bump(z):
    return np.exp(-np.square(z) / 4.0)


def half_lap_profile_quad(z: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """g(z) = pv int (f(z) - f(z - y)) / y^2 dy for f(z) = exp(-z^2/4),
    computed from the symmetric form int_0^inf (2 f(z) - f(z-y) - f(z+y)) / y^2 dy.

    g(0) = sqrt(pi) exactly (the classical integral of (1 - e^{-r^2})/r^2).
    """
    z = abs(float(z))
    fz = math.exp(-z * z / 4.0)
    # second difference is O(y^2): series below y0 avoids cancellation noise
    y0 = 1e-4
    f2 = (z * z / 4.0 - 0.5) * fz
    f4 = (0.75 - 0.75 * z * z + z ** 4 / 16.0) * fz

    def integrand(y):
        if y < y0:
            return -f2 - f4 * y * y / 12.0
        return (2.0 * fz
                - math.exp(-(z - y) ** 2 / 4.0)
                - math.exp(-(z + y) ** 2 / 4.0)) / (y * y)

    Y = z + 30.0
    v, e = _quad(integrand, 0.0, Y, epsabs=cfg.abs_tol,
                          epsrel=cfg.rel_tol, limit=cfg.max_panels,
                          points=[y0, max(z - 2.0, y0), z + 2.0])
    # analytic far tail: f(z +- y) is zero there in double precision
    tail = 2.0 * fz / Y
    if e > 100.0 * max(cfg.abs_tol, abs(v) * cfg.rel_tol):
        raise QuadratureError("half-Laplacian profile quadrature failed",
                              achieved=e)
    return v + tail


@dataclass
class HalfLapTable:
    z: np.ndarray
    g: np.ndarray
    z_max: float
    _sp: CubicSpline = field(repr=False, default=None)

    def __post_init__(self):
        if self._sp is None:
            self._sp = CubicSpline(self.z, self.g)
        # g(z) ~ -2 sqrt(pi) / z^2 at infinity; amplitude matched at the edge
        self._amp = self.g[-1] * self.z_max ** 2

    def g_at(self, z):
        shp = np.shape(z)
        z = np.abs(np.atleast_1d(np.asarray(z, dtype=float)))
        out = np.empty_like(z)
        inside = z <= self.z_max
        out[inside] = self._sp(z[inside])
        if np.any(~inside):
            out[~inside] = self._amp / np.square(z[~inside])
        return out.reshape(shp)


def _get_halflap_table(cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> HalfLapTable:
    key = (cfg.abs_tol, cfg.profile_table_size)
    tab = _G_CACHE.get(key)
    if tab is not None:
        return tab
    z_max = 40.0
    z = np.linspace(0.0, z_max, max(cfg.profile_table_size // 2, 512))
    fp = _disk_cache_file("halflapg", 1, 1.0, cfg)
    g = None
    if fp:
        got = _load_table_csv(fp, "halflapg", 1, 1.0, cfg)
        if got is not None and got[0].size == z.size:
            z, g = got
    if g is None:
        g = np.array([half_lap_profile_quad(zz, cfg) for zz in z])
        if fp:
            _save_table_csv(fp, "halflapg", 1, 1.0, cfg, z, g)
    tab = HalfLapTable(z=np.asarray(z), g=np.asarray(g), z_max=float(z_max))
    _G_CACHE[key] = tab
    return tab


def half_lap_profile(z, cfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """Table-backed g; even in z, with the -2 sqrt(pi)/z^2 tail beyond 40."""
    tab = _get_halflap_table(cfg)
    out = tab.g_at(z)
    return float(out) if np.isscalar(z) else out


def half_lap_heat_kernel(p: PsPoint, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """(-Delta)^(1/2) of the heat kernel, normalized to t^(-1) g(x t^(-1/2));
    zero for t <= 0. Requires n = 1. Takes both signs off the time axis."""
    if p.n != 1:
        raise KernelDomainError("half-Laplacian heat kernel requires n = 1")
    if p.t <= 0.0:
        return 0.0
    z = float(p.x[0]) / math.sqrt(p.t)
    return float(half_lap_profile(z, cfg)) / p.t


# ---------------------------------------------------------------------------
# vectorized kernel evaluation (drives potentials and LP assembly)
# ---------------------------------------------------------------------------

def kernel_component_count(spec: KernelSpec) -> int:
    return spec.n if spec.family in ("GradPs", "GradW") else 1


class _DtFracTable:
    """dt-frac kernel on the unit max-form sphere, scaled by homogeneity.

    The kernel is s-parabolically homogeneous of degree -(n+1); values on the
    sphere are tabulated on four faces (bottom t=-1, side x=1 split at the
    t=0 kink, top t=1) and splined per face. The face functions carry
    algebraic cusps (x^(2s-n) at x=0, |t|^(1-1/(2s)) at t=0), so nodes are
    clustered quadratically toward those edges and evaluation falls back to
    direct quadrature inside the first two intervals. n = 1 only.
    """

    def __init__(self, s: float, cfg: QuadratureConfig, nodes: int = 129):
        self.s = s
        build_cfg = QuadratureConfig(
            abs_tol=max(cfg.abs_tol, 1e-9), rel_tol=max(cfg.rel_tol, 1e-8),
            max_panels=cfg.max_panels,
            profile_table_size=cfg.profile_table_size,
            profile_rho_max=cfg.profile_rho_max)
        self._spec = KernelSpec("DtFracPs", n=1, s=s, quadrature=build_cfg)
        u = np.linspace(0.0, 1.0, nodes)
        xs = u ** 2
        self._x_fb = xs[2]
        self._f_bot = CubicSpline(xs, [dt_frac_ps_kernel(
            PsPoint([x], -1.0), self._spec) for x in xs])
        self._f_top = CubicSpline(xs, [dt_frac_ps_kernel(
            PsPoint([x], 1.0), self._spec) for x in xs])
        tpos = u ** 2
        tneg = -tpos[::-1]
        self._t_fb = tpos[2]
        self._f_sneg = CubicSpline(tneg, [dt_frac_ps_kernel(
            PsPoint([1.0], t), self._spec) for t in tneg])
        self._f_spos = CubicSpline(tpos, [dt_frac_ps_kernel(
            PsPoint([1.0], t), self._spec) for t in tpos])

    def eval(self, DX, DT):
        ax = np.abs(DX[:, 0])
        tt = np.abs(DT) ** (1.0 / (2.0 * self.s))
        sigma = np.maximum(ax, tt)
        if np.any(sigma < _ORIGIN_EPS):
            raise KernelDomainError("dt-frac evaluation at the origin")
        out = np.empty_like(sigma)
        xo = ax / sigma
        to = DT / sigma ** (2.0 * self.s)
        time_face = tt >= ax
        bot = time_face & (DT < 0)
        top = time_face & (DT >= 0)
        out[bot] = self._f_bot(xo[bot])
        out[top] = self._f_top(xo[top])
        side = ~time_face
        sneg = side & (DT < 0)
        spos = side & (DT >= 0)
        out[sneg] = self._f_sneg(np.clip(to[sneg], -1.0, 0.0))
        out[spos] = self._f_spos(np.clip(to[spos], 0.0, 1.0))
        out *= sigma ** (-2.0)  # homogeneity degree -(n+1), n = 1
        cusp = (time_face & (xo < self._x_fb)) | (side & (np.abs(to) < self._t_fb))
        for i in np.nonzero(cusp)[0]:
            out[i] = dt_frac_ps_kernel(PsPoint([DX[i, 0]], DT[i]), self._spec)
        return out


def _get_dtfrac_table(s: float, cfg: QuadratureConfig) -> _DtFracTable:
    key = (round(s, 12), cfg.abs_tol)
    tab = _DTFRAC_CACHE.get(key)
    if tab is None:
        tab = _DtFracTable(s, cfg)
        _DTFRAC_CACHE[key] = tab
    return tab


def kernel_values(spec: KernelSpec, DX: np.ndarray, DT: np.ndarray) -> np.ndarray:
    """Vectorized kernel evaluation at differences (DX, DT).

    DX has shape (N, n), DT shape (N,). Returns (N,) for scalar families and
    (N, n) for gradient families. This is the hot path for potentials and LP
    assembly; the point operations above stay the readable reference.
    """
    DX = np.atleast_2d(np.asarray(DX, dtype=float))
    DT = np.asarray(DT, dtype=float)
    n, s, cfg = spec.n, spec.s, spec.quadrature
    N = DT.size
    pos = DT > 0.0

    if spec.family == "Ps":
        out = np.zeros(N)
        if np.any(pos):
            tp = DT[pos]
            r = np.linalg.norm(DX[pos], axis=1)
            rho = r * tp ** (-1.0 / (2.0 * s))
            out[pos] = tp ** (-n / (2.0 * s)) * phi_profile(rho, n, s, cfg)
        return out

    if spec.family == "W":
        out = np.zeros(N)
        if np.any(pos):
            tp = DT[pos]
            r2 = np.sum(np.square(DX[pos]), axis=1)
            out[pos] = (4.0 * math.pi * tp) ** (-n / 2.0) * np.exp(-r2 / (4.0 * tp))
        return out

    if spec.family in ("GradPs", "GradW"):
        out = np.zeros((N, n))
        if np.any(pos):
            tp = DT[pos]
            X = DX[pos]
            r = np.linalg.norm(X, axis=1)
            ok = r > 1e-12
            if spec.family == "GradW" or s == 1.0:
                r2 = np.sum(np.square(X), axis=1)
                w = (4.0 * math.pi * tp) ** (-n / 2.0) * np.exp(-r2 / (4.0 * tp))
                out[pos] = -X / (2.0 * tp[:, None]) * w[:, None]
            else:
                amp = np.zeros_like(r)
                rho = np.where(ok, r, 1.0) * tp ** (-1.0 / (2.0 * s))
                dphi = phi_profile_deriv(rho, n, s, cfg)
                amp[ok] = (tp[ok] ** (-(n + 1.0) / (2.0 * s)) * dphi[ok] / r[ok])
                out[pos] = X * amp[:, None]
        return out

    if spec.family == "HalfLapW":
        out = np.zeros(N)
        if np.any(pos):
            tp = DT[pos]
            z = DX[pos, 0] / np.sqrt(tp)
            out[pos] = half_lap_profile(z, cfg) / tp
        return out

    if spec.family == "DtFracPs":
        if n != 1:
            raise KernelDomainError(
                "vectorized dt-frac evaluation is implemented for n = 1")
        return _get_dtfrac_table(s, cfg).eval(DX, DT)

    raise ValueError(f"unknown family {spec.family!r}")


def spatial_mass(spec: KernelSpec, t: float) -> float:
    """Numeric spatial integral of the kernel at time t (should be 1)."""
    _require_family(spec, "Ps")
    if t <= 0:
        raise ValueError("mass is defined for t > 0")
    n, s, cfg = spec.n, spec.s, spec.quadrature
    if s in (1.0, 0.5):
        # integrate the closed-form profile on a wide table
        rho = np.linspace(0.0, cfg.profile_rho_max, cfg.profile_table_size)
        phi = phi_profile(rho, n, s, cfg)
        tab = PhiTable(n=n, s=s, rho=rho, phi=phi,
                       dphi=phi_profile_deriv(rho, n, s, cfg),
                       rho_max=cfg.profile_rho_max)
        return tab.spatial_mass()
    # evaluate the actual kernel on a radial grid at this t and integrate;
    # the t-powers cancel algebraically, so this checks table + tail quality
    tab = get_phi_table(n, s, cfg)
    surf = 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)
    rho = tab.rho
    X = np.zeros((rho.size, n))
    X[:, 0] = rho * t ** (1.0 / (2.0 * s))
    kv = kernel_values(spec, X, np.full(rho.size, t))
    prof = kv * t ** (n / (2.0 * s))
    poly = CubicSpline(rho, prof * rho ** (n - 1))
    inner = poly.integrate(0.0, tab.rho_max)
    return float(surf * (inner + tab.tail_mass()))

"""Analytic error-exponent bounds and numeric checks of their infima.

All ``case_*`` coefficients are leading-order exponents in units of
``A1`` (``-ln P >= A1 * coef + o(A1)``). :func:`overall` converts the
minimum to a per-symbol exponent via ``A1 = nA / (1 + beta)``.

The constrained quadratic programs behind the ``k = 0`` and ``k = 4``
bounds are solved numerically so the closed forms can be checked:

* :func:`infimum_2d` minimises ``x^2 + y^2`` over the parabolic-cut sets
  of the ``S2``/``S3`` branches (grid, zoom, then a 1-D Brent polish on
  the active boundary).
* :func:`infimum_5d_k4` solves the three-constraint program of the
  ``k = 4`` case exactly by active-set enumeration and also evaluates the
  two-variable reduction obtained by forcing all constraints active.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .errors import DomainError

__all__ = [
    "TAU2_MIN",
    "TAU2_MAX",
    "TAU3_MIN",
    "ExponentParams",
    "ExponentReport",
    "Case0",
    "exponent_no_feedback",
    "exponent_noiseless_feedback",
    "exponent_theorem",
    "case_k2",
    "case_k0",
    "case_k3",
    "f4",
    "case_k4",
    "overall",
    "tail_bound",
    "joint_tail_bound",
    "parabolic_cut_min",
    "InfimumResult",
    "infimum_2d",
    "branch_chain_bound",
    "branch_reduction",
    "K4Result",
    "infimum_5d_k4",
    "k4_reduced_objective",
    "k4_displayed_min",
    "k4_limit_closed_form",
    "k4_lower_bound",
    "finite_a_diagnostics",
    "verify_point",
]

TAU2_MIN = (math.sqrt(5.0 / 3.0) - 1.0) / 2.0     # ~0.14550
TAU2_MAX = (15.0 - math.sqrt(105.0)) / 30.0       # ~0.15843
TAU3_MIN = (math.sqrt(7.0 / 6.0) - 1.0) / 2.0     # ~0.0400617

# grid + refine settings shared by the 2-D optimisers
BOX = 10.0
GRID_POINTS = 401
ZOOM_STEPS = 6


@dataclass(frozen=True)
class ExponentParams:
    """Parameters of the exponent bounds.

    Hard domain checks reject meaningless values; the operating window of
    the bounds is reported by the ``*_ok`` flags instead.
    """

    beta: float = 0.5
    tau2: float = 0.15
    tau3: float = 0.05
    sigma2: float = 0.0
    A: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if self.tau2 < 0 or self.tau3 < 0:
            raise DomainError("tau2, tau3 must be non-negative")
        if not self.sigma2 >= 0:
            raise DomainError(f"sigma2 must be non-negative, got {self.sigma2}")
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")

    @property
    def tau2_ok(self) -> bool:
        return TAU2_MIN <= self.tau2 <= TAU2_MAX

    @property
    def tau3_ok(self) -> bool:
        return TAU3_MIN <= self.tau3 <= 1.0 - self.tau2

    @property
    def sigma2_ok(self) -> bool:
        return self.sigma2 <= 1.0

    @property
    def beta_ok(self) -> bool:
        return self.beta <= 0.5

    def window_flags(self) -> dict:
        return {"tau2_ok": self.tau2_ok, "tau3_ok": self.tau3_ok,
                "sigma2_ok": self.sigma2_ok, "beta_ok": self.beta_ok}

    @property
    def in_window(self) -> bool:
        return all(self.window_flags().values())


# -- closed forms -------------------------------------------------------------

def _check_A(A):
    if not A > 0:
        raise DomainError(f"A must be positive, got {A}")


def exponent_no_feedback(A: float) -> float:
    """Zero-rate exponent of the AWGN channel without feedback, ``A / 4``."""
    _check_A(A)
    return A / 4.0


def exponent_noiseless_feedback(A: float) -> float:
    """Zero-rate exponent with noiseless feedback, ``A / 2``."""
    _check_A(A)
    return A / 2.0


def exponent_theorem(A: float, sigma2: float):
    """Lower bound ``A (1 - sigma2) / 3`` on the noisy-feedback exponent.

    Returns
    -------
    value : float
    vacuous : bool
        True when ``sigma2 > 1`` (value clamped to 0).
    """
    _check_A(A)
    if sigma2 < 0:
        raise DomainError(f"sigma2 must be non-negative, got {sigma2}")
    if sigma2 > 1:
        return 0.0, True
    return A * (1.0 - sigma2) / 3.0, False


def case_k2(beta: float) -> float:
    """Coefficient of the two-message group case, ``(1 + 2 beta) / 4``."""
    return (1.0 + 2.0 * beta) / 4.0


@dataclass(frozen=True)
class Case0:
    """Combined ``k = 0`` coefficient with its three branch values."""

    value: float
    S2: float
    S3: float
    S4: float
    flags: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.flags.values())


def case_k0(beta: float, tau2: float, tau3: float, sigma2: float) -> Case0:
    """Coefficient of the case where the pair is split by the selection.

    ``value = (1+beta)/4 [1 + min{(1+2 tau2)^2/(3+4 beta),
    (1+2 tau3)^2/(2+3 beta), 1/3}] (1 - sigma2)``. Out-of-range inputs
    are flagged, not rejected.
    """
    s = 1.0 - sigma2
    m = min((1 + 2 * tau2) ** 2 / (3 + 4 * beta),
            (1 + 2 * tau3) ** 2 / (2 + 3 * beta), 1.0 / 3.0)
    value = (1 + beta) / 4.0 * (1.0 + m) * s
    S2 = (1 + beta) * (1 + beta + tau2 + tau2 ** 2) / (3 + 4 * beta) * s
    S3 = (1 + beta) * s * (2 + 3 * beta + (1 + 2 * tau3) ** 2) / (4 * (2 + 3 * beta))
    S4 = 2 * (1 + beta) ** 2 / (5 + 8 * beta)
    flags = {"sigma2_ok": sigma2 <= 1.0, "tau2_ok": tau2 <= 4.0 / 9.0,
             "beta_ok": beta <= 0.5}
    return Case0(value, S2, S3, S4, flags)


def case_k3(beta: float, tau2: float, sigma2: float):
    """Coefficient of the three-message group case.

    Returns
    -------
    full : float
        ``(1/4) [(2 + 3 beta)/2 + ((1 - tau2) + (1 - tau2)^2) / (1 + sigma2)]``
    floor : float
        ``(1 + beta) / 3``, valid for ``beta <= 1/2, tau2 <= 1/3, sigma2 <= 1``.
    """
    u = 1.0 - tau2
    full = 0.25 * ((2 + 3 * beta) / 2.0 + (u + u * u) / (1.0 + sigma2))
    return full, (1.0 + beta) / 3.0


def f4(beta: float, tau2: float) -> float:
    """``(3+4 beta)(3+4 beta-6 tau2+6 tau2^2) / (6 (3+8 beta))``."""
    return (3 + 4 * beta) * (3 + 4 * beta - 6 * tau2 + 6 * tau2 ** 2) / (6 * (3 + 8 * beta))


def case_k4(beta: float, tau2: float, sigma2: float, tau3: float | None = None) -> float:
    """Coefficient of the four-message group case, ``f4 (1 - sigma2)``.

    Raises if ``tau2 + tau3 > 1`` (when `tau3` is given).
    """
    if tau3 is not None and tau2 + tau3 > 1.0:
        raise DomainError("case k=4 bound needs tau2 + tau3 <= 1")
    return f4(beta, tau2) * (1.0 - sigma2)


@dataclass
class ExponentReport:
    """Per-case coefficients (``A1`` units), overall exponent and flags.

    ``e_k2``, ``e_k3`` and ``e_k4`` are the terms of the final assembly,
    each carrying the ``(1 - sigma2)`` factor; the raw case values are kept
    in ``e_k2_raw`` and ``e_k3_full``. ``per_n`` is the exponent per channel
    use, ``A / (1 + beta) * overall``.
    """

    params: ExponentParams
    e_k2: float
    e_k0: float
    e_S2: float
    e_S3: float
    e_S4: float
    e_k3: float
    e_k4: float
    e_k2_raw: float
    e_k3_full: float
    overall: float
    per_n: float
    flags: dict
    vacuous: bool = False
    numeric: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = asdict(self.params)
        for key in ("e_k2", "e_k0", "e_S2", "e_S3", "e_S4", "e_k3", "e_k4",
                    "e_k2_raw", "e_k3_full", "overall", "per_n", "vacuous"):
            row[key] = getattr(self, key)
        row.update(self.flags)
        row.update(self.numeric)
        return row


def overall(params: ExponentParams) -> ExponentReport:
    """Assemble the exponent ``A1 (1 - sigma2) min{(1+beta)/3, (1+2beta)/4, f4}``.

    The ``k = 0`` term enters through its combined form, which equals
    ``(1+beta)(1-sigma2)/3`` inside the window; outside it the smaller
    combined value is used. ``sigma2 > 1`` makes the bound vacuous and
    every coefficient is clamped to 0.
    """
    b, t2, t3, s2 = params.beta, params.tau2, params.tau3, params.sigma2
    vacuous = s2 > 1.0
    s = max(1.0 - s2, 0.0)
    c0 = case_k0(b, t2, t3, min(s2, 1.0))
    full3, floor3 = case_k3(b, t2, s2)
    e_k2 = case_k2(b) * s
    e_k3 = floor3 * s
    e_k4 = f4(b, t2) * s
    e_k0 = c0.value
    coef = min(e_k2, e_k0, e_k3, e_k4)
    flags = params.window_flags()
    flags["tau_sum_ok"] = t2 + t3 <= 1.0
    return ExponentReport(
        params=params, e_k2=e_k2, e_k0=e_k0, e_S2=c0.S2, e_S3=c0.S3, e_S4=c0.S4,
        e_k3=e_k3, e_k4=e_k4, e_k2_raw=case_k2(b), e_k3_full=full3,
        overall=coef, per_n=params.A / (1.0 + b) * coef, flags=flags,
        vacuous=vacuous)


# -- Gaussian tail inequalities ---------------------------------------------

def tail_bound(z):
    """``exp(-max(z, 0)^2 / 2) >= P(xi >= z)`` for standard Gaussian ``xi``."""
    zp = np.maximum(np.asarray(z, dtype=float), 0.0)
    out = np.exp(-0.5 * zp * zp)
    return float(out) if out.ndim == 0 else out


def joint_tail_bound(A: float, B: float, rho: float) -> float:
    """Bound on ``P(xi >= A, eta >= B)`` for unit Gaussians with correlation `rho`.

    If ``A - B rho >= 0`` and ``B - A rho >= 0`` the bound is
    ``exp(-r^2 / 2)`` with ``r^2 = (A^2 + B^2 - 2 A B rho) / (1 - rho^2)``;
    otherwise the smaller marginal bound is returned.
    """
    if not abs(rho) < 1:
        raise DomainError(f"need |rho| < 1, got {rho}")
    if A - B * rho >= 0 and B - A * rho >= 0:
        r2 = (A * A + B * B - 2 * A * B * rho) / (1 - rho * rho)
        return math.exp(-0.5 * r2)
    return min(tail_bound(A), tail_bound(B))


# -- two-dimensional infima -------------------------------------------------

@dataclass(frozen=True)
class InfimumResult:
    value: float
    x: float
    y: float
    grid_value: float


def _boundary_x(c1, c2, c3, t, rhs, y):
    pos = max(y + t, 0.0)
    pen = c3 * pos * pos if pos > 0 else 0.0
    return (rhs - c2 * y + pen) / c1


def parabolic_cut_min(c1: float, c2: float, c3: float, t: float, rhs: float,
                      box: float = BOX, points: int = GRID_POINTS,
                      zoom: int = ZOOM_STEPS) -> InfimumResult:
    """Minimise ``x^2 + y^2`` subject to ``c1 x + c2 y - c3 (y + t)_+^2 >= rhs``.

    Coarse grid over ``[-box, box]^2``, `zoom` halvings of the window
    around the incumbent, then a bounded Brent search over ``y`` of
    ``h(y) = max(x_b(y), 0)^2 + y^2`` over the whole box, where ``x_b`` is
    the boundary. ``h`` is convex, so the polish reaches the global
    minimum; the grid result is kept if it is lower. ``c3 = inf`` is the hard wall ``y <= -t``.
    """
    if not c1 > 0 or c3 < 0:
        raise DomainError("need c1 > 0 and c3 >= 0")
    half = box
    cx = cy = 0.0
    best = math.inf
    grid_best = None
    for step in range(zoom + 1):
        xs = np.linspace(cx - half, cx + half, points)
        ys = np.linspace(cy - half, cy + half, points)
        val, bx, by = kernels.parabolic_cut_grid_min(c1, c2, c3, t, rhs, xs, ys)
        if step == 0:
            grid_best = val
            if not math.isfinite(val):
                raise DomainError("no feasible grid point in the bounding box")
        if val <= best:
            best, cx, cy = val, bx, by
        half /= 2.0
    wall = -t if math.isinf(c3) else math.inf

    def h(y):
        if y > wall:
            return math.inf
        xb = _boundary_x(c1, c2, 0.0 if math.isinf(c3) else c3, t, rhs, y)
        return max(xb, 0.0) ** 2 + y * y

    lo, hi = -box, min(box, wall)
    if hi > lo:
        res = minimize_scalar(h, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        y = float(res.x)
        v = h(y)
        if v < best:
            x = max(_boundary_x(c1, c2, 0.0 if math.isinf(c3) else c3, t, rhs, y), 0.0)
            return InfimumResult(v, x, y, grid_best)
    return InfimumResult(best, cx, cy, grid_best)


def branch_reduction(branch: str, beta: float, tau: float, sigma2: float):
    """Coefficients ``(c1, c2, c3, t, rhs)`` of the parabolic-cut set.

    ``S2``: ``sqrt(3+4b) x + y - (tau/sqrt2 + y)_+^2 / (s2 sqrt2) >= (1+b) sqrt2``.
    ``S3``: ``sqrt(2(2+3b)) x + sqrt2 y - sqrt3 (sqrt(2/3) tau + y)_+^2 / s2
    >= sqrt3 (1+b)``.
    """
    inv = math.inf if sigma2 == 0 else 1.0 / sigma2
    if branch == "S2":
        return (math.sqrt(3 + 4 * beta), 1.0, inv / math.sqrt(2.0),
                tau / math.sqrt(2.0), (1 + beta) * math.sqrt(2.0))
    if branch == "S3":
        return (math.sqrt(2 * (2 + 3 * beta)), math.sqrt(2.0), math.sqrt(3.0) * inv,
                math.sqrt(2.0 / 3.0) * tau, math.sqrt(3.0) * (1 + beta))
    raise DomainError(f"unknown branch {branch!r}")


def branch_chain_bound(branch: str, beta: float, tau: float, sigma2: float):
    """Closed-form lower bound ``B^2 + a^2 - a^2 / (2 B eps)`` on the infimum.

    Returns ``(bound, eps, a, B)``. ``B < 0`` is outside the derivation
    and raises.
    """
    if not sigma2 > 0:
        raise DomainError("chain bound needs sigma2 > 0")
    if branch == "S2":
        eps = 1.0 / (sigma2 * math.sqrt(2 * (3 + 4 * beta)))
        a = math.sqrt(2.0) * (tau - sigma2) / 2.0
        B = math.sqrt(2.0 / (3 + 4 * beta)) * (1 + beta + (2 * tau - sigma2) / 4.0)
    elif branch == "S3":
        eps = math.sqrt(3.0 / (2 * (2 + 3 * beta))) / sigma2
        a = (2 * tau - sigma2) / math.sqrt(6.0)
        B = (6 * (1 + beta) + 4 * tau - sigma2) / (2 * math.sqrt(6 * (2 + 3 * beta)))
    else:
        raise DomainError(f"unknown branch {branch!r}")
    if B < 0:
        raise DomainError("B < 0: closed-form chain not defined")
    return B * B + a * a - a * a / (2 * B * eps), eps, a, B


def infimum_2d(branch: str, beta: float, tau: float, sigma2: float) -> InfimumResult:
    """Numeric ``inf (x^2 + y^2)`` over the ``S2`` or ``S3`` constraint set.

    ``-ln P >= A1 * value / 2``. ``sigma2 = 0`` uses the hard-wall limit.
    """
    if sigma2 < 0:
        raise DomainError("sigma2 must be non-negative")
    return parabolic_cut_min(*branch_reduction(branch, beta, tau, sigma2))


# -- the k = 4 program ------------------------------------------------------

def _k4_constraints(beta, tau2, tau3, sigma2):
    r = math.sqrt(1.0 + sigma2)
    s = math.sqrt(sigma2)
    G = np.array([
        [-1.0, math.sqrt(1 + 8 * beta / 3), 0.0, 0.0, 0.0],
        [-1.0, 0.0, r, 0.0, -s],
        [0.0, 0.0, -r, r, 0.0],
    ])
    h = np.array([1 + 4 * beta / 3, 1 - tau2, -tau3])
    return G, h


def _min_norm_active_set(G, h):
    """Exact ``min ||z||^2`` s.t. ``G z >= h`` by enumerating active sets."""
    best, zbest = math.inf, None
    m = len(h)
    for size in range(m + 1):
        for act in itertools.combinations(range(m), size):
            if size == 0:
                z = np.zeros(G.shape[1])
                lam = np.zeros(0)
            else:
                Ga = G[list(act)]
                K = Ga @ Ga.T
                if abs(np.linalg.det(K)) < 1e-14:
                    continue
                lam = np.linalg.solve(K, h[list(act)])
                z = Ga.T @ lam
            if np.any(lam < -1e-12) or np.any(G @ z < h - 1e-10):
                continue
            v = float(z @ z)
            if v < best:
                best, zbest = v, z
    return best, zbest


def k4_reduced_objective(z1, y3, beta, tau2, tau3, sigma2):
    """The program with all three constraints active, in ``(z1, y3)``."""
    return (z1 ** 2 + (3 * z1 + 3 + 4 * beta) ** 2 / (3 * (3 + 8 * beta))
            + (y3 ** 2 + (y3 - tau3) ** 2) / (1 + sigma2)
            + (y3 - z1 - 1 + tau2) ** 2 / sigma2)


def _reduced_min(beta, tau2, tau3, sigma2):
    # grid + zoom, then one Newton step (the objective is a convex quadratic)
    args = (beta, tau2, tau3, sigma2)
    half, cx, cy = BOX, 0.0, 0.0
    for _ in range(ZOOM_STEPS + 1):
        xs = np.linspace(cx - half, cx + half, GRID_POINTS)
        ys = np.linspace(cy - half, cy + half, GRID_POINTS)
        F = k4_reduced_objective(xs[:, None], ys[None, :], *args)
        i, j = np.unravel_index(int(np.argmin(F)), F.shape)
        cx, cy = float(xs[i]), float(ys[j])
        half /= 2.0
    b, s2 = beta, sigma2
    H = 2 * np.array([
        [1 + 3 / (3 + 8 * b) + 1 / s2, -1 / s2],
        [-1 / s2, 2 / (1 + s2) + 1 / s2],
    ])
    g = 2 * np.array([
        cx + (3 * cx + 3 + 4 * b) / (3 + 8 * b) - (cy - cx - 1 + tau2) / s2,
        (2 * cy - tau3) / (1 + s2) + (cy - cx - 1 + tau2) / s2,
    ])
    z1, y3 = np.array([cx, cy]) - np.linalg.solve(H, g)
    return float(k4_reduced_objective(z1, y3, *args)), float(z1), float(y3)


def k4_displayed_min(beta, tau2, tau3, sigma2):
    """The closed form offered for the all-active reduction (not its true
    minimum; see the module tests)."""
    q = (3 * tau2 + 4 * beta)
    head = (1 - tau2) ** 2 + q * q / (3 * (3 + 8 * beta))
    tail = sigma2 * tau3 ** 2 / ((1 + sigma2) * (1 + 3 * sigma2))
    num = (1 - tau2 - q / (3 + 8 * beta) - tau3 / (1 + 3 * sigma2)) ** 2
    den = (1 + 3 / (3 + 8 * beta) + 1 / sigma2
           + (1 + sigma2) / (sigma2 * (1 + 3 * sigma2)))
    return head + tail - num / den


def k4_limit_closed_form(beta, tau2):
    """``(1 - tau2)^2 + (3 tau2 + 4 beta)^2 / (3 (3 + 8 beta))``."""
    return (1 - tau2) ** 2 + (3 * tau2 + 4 * beta) ** 2 / (3 * (3 + 8 * beta))


def k4_lower_bound(beta, tau2, sigma2):
    """``(3+4b)(3+4b-6 tau2+6 tau2^2)(1-sigma2) / (3 (3+8b))`` = ``2 f4 (1-sigma2)``."""
    return 2.0 * f4(beta, tau2) * (1.0 - sigma2)


@dataclass(frozen=True)
class K4Result:
    """``value`` is the exact program minimum (``-2 ln P >= A1 value``)."""

    value: float
    z: np.ndarray
    reduced_value: float
    reduced_point: tuple
    displayed: float
    bound: float
    limit: float


def infimum_5d_k4(beta: float, tau2: float, tau3: float, sigma2: float) -> K4Result:
    """Minimum of ``||z||^2`` over the three-constraint set in ``R^5``.

    The exact minimum comes from active-set enumeration; the all-active
    two-variable reduction is minimised separately (grid, zoom, Newton)
    and reported alongside, since it only bounds the program from above.
    """
    if not sigma2 > 0:
        raise DomainError("k=4 program needs sigma2 > 0")
    G, h = _k4_constraints(beta, tau2, tau3, sigma2)
    value, z = _min_norm_active_set(G, h)
    red, z1, y3 = _reduced_min(beta, tau2, tau3, sigma2)
    return K4Result(value, z, red, (z1, y3),
                    k4_displayed_min(beta, tau2, tau3, sigma2),
                    k4_lower_bound(beta, tau2, sigma2),
                    k4_limit_closed_form(beta, tau2))


# -- diagnostics ------------------------------------------------------------

def finite_a_diagnostics(A1: float, beta: float) -> dict:
    """Finite-``A1`` pieces dropped from the leading-order coefficients.

    ``k2_bound`` is the tail bound with the ``ln 3`` shift kept,
    ``k2_bound_sqrt3`` its ``sqrt(3)``-prefactor relaxation.
    """
    if not A1 > 0:
        raise DomainError("A1 must be positive")
    E = A1 * (1 + 2 * beta)
    shifted = max(E - math.log(3.0), 0.0)
    return {
        "k2_bound": math.exp(-shifted ** 2 / (4 * E)),
        "k2_bound_sqrt3": math.sqrt(3.0) * math.exp(-E / 4),
        "k2_prefactor": math.sqrt(3.0),
        "ln3_shift": math.log(3.0),
        "ln4_shift": math.log(4.0),
    }


def verify_point(params: ExponentParams) -> dict:
    """One row of the numeric verification table.

    Infima are in ``-2 ln P / A1`` units; ``gap`` columns are numeric
    minus closed-form bound (non-negative means the bound holds).
    """
    rep = overall(params)
    row = rep.as_row()
    b, t2, t3, s2 = params.beta, params.tau2, params.tau3, params.sigma2
    if s2 > 0:
        for br, tau, simple in (("S2", t2, rep.e_S2), ("S3", t3, rep.e_S3)):
            inf = infimum_2d(br, b, tau, s2).value
            chain = branch_chain_bound(br, b, tau, s2)[0]
            row[f"inf_{br}"] = inf
            row[f"chain_{br}"] = chain
            row[f"gap_{br}"] = inf - chain
            row[f"gap_{br}_simplified"] = inf / 2 - simple
        k4 = infimum_5d_k4(b, t2, t3, s2)
        row.update(inf_k4=k4.value, reduced_k4=k4.reduced_value,
                   displayed_k4=k4.displayed, bound_k4=k4.bound,
                   gap_k4=k4.value - k4.bound)
    return row

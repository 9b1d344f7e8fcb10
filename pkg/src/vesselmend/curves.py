"""Discrete space-curve analysis and the touching-fit scoring of endpoint pairs.

A candidate connection between two vessel stumps is scored by fitting, from
each stump's endpoint frame, a canonical cubic connector

    x(s) = s,   y(s) = k0/2 * s^2,   z(s) = k0*t0/6 * s^3

expressed in the stump's Frenet frame, transporting that frame along the
connector to the opposite endpoint, and averaging the frame discrepancy in
both directions.  Values below sqrt(2) indicate stumps whose local geometry
continues smoothly across the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .skeleton import EndpointInfo

TFD_INFINITE = float("inf")
KAPPA_MIN = 1e-3  # 1/mm; below this the normal direction is unreliable

# fixed, non-axis-aligned reference used to complete frames on straight chains
_REF = np.array([0.48038446, 0.62449980, 0.61574070])


class DegenerateCurveError(ValueError):
    """Curve too short to carry a frame."""


class ImplausibleGeometryError(ValueError):
    """Connector target lies beside or behind the tangent ray."""


@dataclass
class DiscreteCurve:
    points: np.ndarray      # (n, 3) mm
    arclength: np.ndarray   # (n,) cumulative, strictly increasing

    @classmethod
    def from_points(cls, pts) -> "DiscreteCurve":
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise DegenerateCurveError(f"need at least 2 distinct 3D points, got shape {pts.shape}")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg == 0):
            keep = np.concatenate([[True], seg > 0])
            pts = pts[keep]
            if len(pts) < 2:
                raise DegenerateCurveError("all points coincide")
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        return cls(points=pts, arclength=s)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])


@dataclass
class FrenetFrame:
    origin: np.ndarray
    alpha: np.ndarray   # tangent
    beta: np.ndarray    # normal
    gamma: np.ndarray   # binormal
    kappa: float
    tau: float
    degenerate: bool = False


@dataclass
class CanonicalCubic:
    frame: FrenetFrame  # base frame at the stump endpoint
    kappa0: float
    tau0: float
    s_star: float       # frame-x coordinate of the far endpoint


def resample_arclength(curve: DiscreteCurve, h: float) -> DiscreteCurve:
    """Uniform arc-length resampling by linear interpolation.

    The endpoints are kept exactly; interior samples are spaced
    ``length/(n-1)`` with ``n`` chosen so the spacing is as close to ``h``
    as possible.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    if curve.length < h:
        raise ValueError(f"curve length {curve.length:.3g} shorter than h={h:.3g}")
    n = max(2, int(round(curve.length / h)) + 1)
    s_new = np.linspace(0.0, curve.length, n)
    pts = np.empty((n, 3))
    for k in range(3):
        pts[:, k] = np.interp(s_new, curve.arclength, curve.points[:, k])
    pts[0] = curve.points[0]
    pts[-1] = curve.points[-1]
    return DiscreteCurve.from_points(pts)


def _orthonormalize(alpha, beta):
    alpha = alpha / np.linalg.norm(alpha)
    beta = beta - np.dot(beta, alpha) * alpha
    nb = np.linalg.norm(beta)
    if nb < 1e-14:
        beta = _fallback_normal(alpha)
    else:
        beta = beta / nb
    gamma = np.cross(alpha, beta)
    return alpha, beta, gamma


def _fallback_normal(alpha):
    ref = _REF
    if abs(np.dot(ref, alpha)) > 0.999:
        ref = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(ref, alpha)) > 0.999:
            ref = np.array([0.0, 1.0, 0.0])
    beta = ref - np.dot(ref, alpha) * alpha
    return beta / np.linalg.norm(beta)


def _poly_derivatives(curve: DiscreteCurve, at_end: bool, window: int):
    """Least-squares cubic fit of x(s), y(s), z(s) near one endpoint.

    Returns the point and first three derivatives with respect to arc
    length at that endpoint.
    """
    n = len(curve.points)
    w = min(n, max(4, window))
    if at_end:
        pts = curve.points[n - w:]
        s = curve.arclength[n - w:]
        s0 = s[-1]
    else:
        pts = curve.points[:w]
        s = curve.arclength[:w]
        s0 = s[0]
    t = s - s0
    # keep at least one residual degree of freedom: an interpolating fit
    # on a handful of quantized points produces wild endpoint derivatives
    deg = min(3, max(1, len(t) - 2))
    # Vandermonde LS fit per coordinate, centered at the endpoint
    V = np.vander(t, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, pts, rcond=None)
    r0 = coef[0]
    d1 = coef[1] if deg >= 1 else np.zeros(3)
    d2 = 2.0 * coef[2] if deg >= 2 else np.zeros(3)
    d3 = 6.0 * coef[3] if deg >= 3 else np.zeros(3)
    return r0, d1, d2, d3


def _frame_from_derivatives(origin, d1, d2, d3, kappa_min=KAPPA_MIN) -> FrenetFrame:
    speed = np.linalg.norm(d1)
    if speed < 1e-14:
        raise DegenerateCurveError("vanishing tangent")
    cross = np.cross(d1, d2)
    ncross = np.linalg.norm(cross)
    kappa = ncross / speed ** 3
    if kappa >= kappa_min:
        tau = float(np.dot(cross, d3)) / ncross ** 2
        alpha, beta, gamma = _orthonormalize(d1, d2)
        return FrenetFrame(np.asarray(origin, float), alpha, beta, gamma,
                           float(kappa), float(tau), degenerate=False)
    alpha = d1 / speed
    beta = _fallback_normal(alpha)
    gamma = np.cross(alpha, beta)
    return FrenetFrame(np.asarray(origin, float), alpha, beta, gamma,
                       float(kappa), 0.0, degenerate=True)


def frenet_frame(curve: DiscreteCurve, at: str = "start",
                 orientation: str = "inward", window: int = 7,
                 kappa_min: float = KAPPA_MIN) -> FrenetFrame:
    """Frenet frame of a polyline at one endpoint.

    ``at`` selects the endpoint ("start" or "end").  ``orientation``
    fixes the tangent sign relative to the curve's stored direction:
    "inward" points from the endpoint into the curve, "outward" away
    from it.  Straight stretches (kappa below ``KAPPA_MIN``) get a
    reference-seeded normal and the degenerate flag.
    """
    if at not in ("start", "end"):
        raise ValueError("at must be 'start' or 'end'")
    if orientation not in ("inward", "outward"):
        raise ValueError("orientation must be 'inward' or 'outward'")
    if len(curve.points) < 2:
        raise DegenerateCurveError("fewer than 2 points")

    at_end = at == "end"
    origin, d1, d2, d3 = _poly_derivatives(curve, at_end, window)
    # flip the parameter direction when the requested flow direction opposes
    # the stored one: at "start" the stored direction points inward, at "end"
    # it points outward
    stored_inward = not at_end
    flip = (orientation == "inward") != stored_inward
    if flip:
        d1 = -d1
        d3 = -d3  # odd derivatives flip under s -> -s; d2 is even
    return _frame_from_derivatives(origin, d1, d2, d3, kappa_min=kappa_min)


def fit_canonical_cubic(frame_p0: FrenetFrame, q0, x_min_factor: float = 0.25) -> CanonicalCubic:
    """Fit the canonical cubic connector from ``frame_p0`` to the point ``q0``.

    The target is expressed in frame coordinates (xh, yh, zh); the cubic
    passing through it has k0 = 2*yh/xh^2 and t0 = 6*zh/(k0*xh^3).
    Targets with xh below ``x_min_factor`` times the gap distance would
    force the connector to bend away immediately and are rejected.
    """
    q0 = np.asarray(q0, dtype=float)
    d = q0 - frame_p0.origin
    dist = np.linalg.norm(d)
    if dist < 1e-12:
        raise ImplausibleGeometryError("target coincides with the frame origin")
    xh = float(np.dot(d, frame_p0.alpha))
    yh = float(np.dot(d, frame_p0.beta))
    zh = float(np.dot(d, frame_p0.gamma))
    if xh <= x_min_factor * dist:
        raise ImplausibleGeometryError(
            f"target lies beside/behind the tangent: x={xh:.3g} vs gap {dist:.3g}")
    kappa0 = 2.0 * yh / xh ** 2
    if abs(kappa0) > 1e-12:
        tau0 = 6.0 * zh / (kappa0 * xh ** 3)
    else:
        kappa0 = 0.0
        tau0 = 0.0
    return CanonicalCubic(frame=frame_p0, kappa0=kappa0, tau0=tau0, s_star=xh)


def cubic_point_at(cubic: CanonicalCubic, s: float) -> np.ndarray:
    """World-space point of the canonical cubic at parameter s."""
    k0, t0 = cubic.kappa0, cubic.tau0
    local = np.array([s, 0.5 * k0 * s ** 2, k0 * t0 * s ** 3 / 6.0])
    f = cubic.frame
    return f.origin + local[0] * f.alpha + local[1] * f.beta + local[2] * f.gamma


def cubic_frenet_at(cubic: CanonicalCubic, s: float) -> FrenetFrame:
    """Transported frame of the connector at parameter s (base frame at s=0).

    The frame is carried with the signed bending of the cubic so that it
    coincides with the base frame exactly at s=0, also when k0 < 0.
    """
    k0, t0 = cubic.kappa0, cubic.tau0
    f = cubic.frame
    d1 = np.array([1.0, k0 * s, 0.5 * k0 * t0 * s ** 2])
    d2 = np.array([0.0, k0, k0 * t0 * s])
    d3 = np.array([0.0, 0.0, k0 * t0])

    speed = np.linalg.norm(d1)
    cross = np.cross(d1, d2)
    ncross = np.linalg.norm(cross)
    if k0 == 0.0 or ncross < 1e-14:
        alpha_l = d1 / speed
        beta_l = np.array([0.0, 1.0, 0.0])
        beta_l = beta_l - np.dot(beta_l, alpha_l) * alpha_l
        beta_l /= np.linalg.norm(beta_l)
        kappa = 0.0
        tau = 0.0
    else:
        sign = 1.0 if k0 > 0 else -1.0
        alpha_l = d1 / speed
        beta_l = d2 - np.dot(d2, alpha_l) * alpha_l
        beta_l = sign * beta_l / np.linalg.norm(beta_l)
        kappa = ncross / speed ** 3
        tau = float(np.dot(cross, d3)) / ncross ** 2
    gamma_l = np.cross(alpha_l, beta_l)

    R = np.column_stack([f.alpha, f.beta, f.gamma])  # local -> world
    local = np.array([s, 0.5 * k0 * s ** 2, k0 * t0 * s ** 3 / 6.0])
    return FrenetFrame(
        origin=f.origin + R @ local,
        alpha=R @ alpha_l, beta=R @ beta_l, gamma=R @ gamma_l,
        kappa=float(kappa), tau=float(tau),
        degenerate=(k0 == 0.0))


def touching_bias(frame_a: FrenetFrame, frame_b: FrenetFrame) -> float:
    """Mean L2 discrepancy of the two frames' axes; range [0, 2]."""
    return float(
        (np.linalg.norm(frame_a.alpha - frame_b.alpha)
         + np.linalg.norm(frame_a.beta - frame_b.beta)
         + np.linalg.norm(frame_a.gamma - frame_b.gamma)) / 3.0)


def _endpoint_frames(ep: EndpointInfo, window: int, kappa_min: float = KAPPA_MIN):
    """Outward and inward frames at a stump endpoint.

    The stored chain runs endpoint -> interior, so the endpoint sits at
    the curve start.
    """
    curve = DiscreteCurve.from_points(ep.chain_mm)
    out = frenet_frame(curve, at="start", orientation="outward", window=window,
                       kappa_min=kappa_min)
    inw = frenet_frame(curve, at="start", orientation="inward", window=window,
                       kappa_min=kappa_min)
    return out, inw


def _reseed_normal(frame: FrenetFrame, candidates) -> FrenetFrame:
    """Replace the reference-seeded normal of a degenerate frame.

    A straight stump carries no intrinsic normal, so the fixed reference
    vector used by ``frenet_frame`` is arbitrary and, worse, not
    rotation-equivariant.  Seeding from directions derived from the
    endpoint pair itself keeps the touching bias rigid-invariant.  When
    every candidate is parallel to the tangent (exactly collinear
    stumps) the reference normal is kept; the bias vanishes there
    regardless of the choice.
    """
    for cand in candidates:
        if cand is None:
            continue
        cand = np.asarray(cand, dtype=float)
        scale = np.linalg.norm(cand)
        if scale < 1e-14:
            continue
        b = cand - np.dot(cand, frame.alpha) * frame.alpha
        nb = np.linalg.norm(b)
        if nb > 1e-9 * scale:
            beta = b / nb
            return FrenetFrame(frame.origin, frame.alpha, beta,
                               np.cross(frame.alpha, beta),
                               frame.kappa, frame.tau, degenerate=True)
    return frame


def _one_sided_bias(ep_from: EndpointInfo, ep_to: EndpointInfo, window: int,
                    kappa_min: float = KAPPA_MIN) -> float:
    """D_from(to): transport the source stump's frame along the fitted
    connector to the target endpoint and compare against the target
    stump's inward-continuation frame."""
    out_frame, _ = _endpoint_frames(ep_from, window, kappa_min)
    # flow continues into the target vessel, so compare against the target
    # stump's inward-pointing frame
    _, continuation = _endpoint_frames(ep_to, window, kappa_min)

    gap = np.asarray(ep_to.chain_mm[0], float) - np.asarray(ep_from.chain_mm[0], float)
    if out_frame.degenerate:
        out_frame = _reseed_normal(out_frame, [
            continuation.beta if not continuation.degenerate else None,
            gap, np.cross(out_frame.alpha, continuation.alpha)])

    cubic = fit_canonical_cubic(out_frame, ep_to.chain_mm[0])
    transported = cubic_frenet_at(cubic, cubic.s_star)

    if continuation.degenerate:
        continuation = _reseed_normal(continuation, [
            transported.beta, gap,
            np.cross(continuation.alpha, transported.alpha)])
    return touching_bias(transported, continuation)


def tfd_with_reason(ep_p: EndpointInfo, ep_q: EndpointInfo, window: int = 7,
                    kappa_min: float = KAPPA_MIN):
    """Touching fit degree of two stumps, or (+inf, reason) when undefined.

    ``kappa_min`` sets the curvature below which a stump frame's normal
    is considered unreliable and is reseeded from the pair geometry.
    Chains read off a voxel skeleton should raise it to the staircase
    noise floor (roughly the reciprocal voxel size), since short voxel
    chains cannot support any physical curvature estimate.
    """
    if ep_p.degenerate or ep_q.degenerate:
        return TFD_INFINITE, "degenerate-endpoint"
    try:
        d_pq = _one_sided_bias(ep_p, ep_q, window, kappa_min)
        d_qp = _one_sided_bias(ep_q, ep_p, window, kappa_min)
    except ImplausibleGeometryError:
        return TFD_INFINITE, "implausible-geometry"
    except DegenerateCurveError:
        return TFD_INFINITE, "degenerate-endpoint"
    return 0.5 * (d_pq + d_qp), None


def tfd(ep_p: EndpointInfo, ep_q: EndpointInfo, window: int = 7,
        kappa_min: float = KAPPA_MIN) -> float:
    """Symmetric touching fit degree; +inf when the pair is unscorable."""
    value, _ = tfd_with_reason(ep_p, ep_q, window, kappa_min)
    return value

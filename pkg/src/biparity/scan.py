"""Purification-rate maps over all measurement-axis orientations.

Axes are parameterised by zenith ``phi`` (from +z) and azimuth ``theta``
(from +x): ``n = (sin phi cos theta, sin phi sin theta, cos phi)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .linalg3 import cross, dot3, matvec3, norm3, sign_normalize, svd3
from .pauli import coefficients, correlation_matrix
from .strategies import rate_alice

__all__ = [
    "RateMap",
    "ArgmaxResult",
    "axis_from_angles",
    "angles_from_axis",
    "fibonacci_sphere",
    "rates_at",
    "rate_map",
    "argmax_axis",
    "golden_section_max",
    "render_svg",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def axis_from_angles(phi, theta):
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = np.sin(phi)
    return np.stack(np.broadcast_arrays(s * np.cos(theta), s * np.sin(theta), np.cos(phi)), axis=-1)


def angles_from_axis(n):
    n = np.asarray(n, dtype=float)
    phi = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
    theta = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2.0 * np.pi)
    return phi, theta


def fibonacci_sphere(count):
    """``count`` nearly uniform unit vectors on a golden-angle spiral."""
    i = np.arange(count, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / count
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    ang = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=-1)


def rates_at(state, axes, k):
    """``(rate_a, rate_b)`` drifts at each axis in ``axes`` (shape ``(..., 3)``)."""
    r = coefficients(state)
    c = correlation_matrix(r)
    axes = np.asarray(axes, dtype=float)
    dr = matvec3(c, axes)
    rate_b = 4.0 * k * dot3(dr, dr)
    rate_a, _ = rate_alice(r, axes, k)
    return rate_a, rate_b


@dataclass
class RateMap:
    zeniths: np.ndarray
    azimuths: np.ndarray
    rate_a: np.ndarray  # (len(zeniths), len(azimuths))
    rate_b: np.ndarray
    k: float

    @property
    def zenith_count(self):
        return len(self.zeniths)

    @property
    def azimuth_count(self):
        return len(self.azimuths)

    def argmax(self, which="b"):
        grid = self.rate_b if which == "b" else self.rate_a
        i, j = np.unravel_index(np.argmax(grid), grid.shape)
        return float(self.zeniths[i]), float(self.azimuths[j]), float(grid[i, j])

    def to_csv(self, path=None):
        """Rows ``phi_rad, theta_rad, rate_a, rate_b`` with phi varying slowest."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi_rad", "theta_rad", "rate_a", "rate_b"])
        for i, phi in enumerate(self.zeniths):
            for j, theta in enumerate(self.azimuths):
                w.writerow([repr(float(phi)), repr(float(theta)), repr(float(self.rate_a[i, j])), repr(float(self.rate_b[i, j]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def rate_map(state, k, zenith_count=181, azimuth_count=361):
    if zenith_count < 2 or azimuth_count < 2:
        raise ValueError("grid sizes must be >= 2")
    phis = np.linspace(0.0, math.pi, zenith_count)
    thetas = np.arange(azimuth_count) * (2.0 * math.pi / azimuth_count)
    axes = axis_from_angles(phis[:, None], thetas[None, :])
    ra, rb = rates_at(state, axes, k)
    return RateMap(phis, thetas, ra, rb, float(k))


# --- argmax with SVD cross-check -------------------------------------------

def golden_section_max(f, lo, hi, tol=1e-12, max_iter=200):
    """Maximise a unimodal scalar function on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _tangent_frame(n):
    e = np.eye(3)[int(np.argmin(np.abs(n)))]
    t1 = e - dot3(e, n) * n
    t1 = t1 / norm3(t1)
    return t1, cross(n, t1)


def _refine(q, n0, step, rounds=40):
    """Great-circle golden-section search around ``n0``.

    Each round searches along the two tangent directions at the current
    point and then along the net displacement of the round (a Powell-style
    conjugate direction), so elongated maxima converge quickly.
    """
    def along(n, t, half):
        def f(alpha):
            return q(math.cos(alpha) * n + math.sin(alpha) * t)

        alpha, _ = golden_section_max(f, -half, half, tol=1e-13)
        m = math.cos(alpha) * n + math.sin(alpha) * t
        return m / norm3(m)

    n = n0 / norm3(n0)
    half = step
    for _ in range(rounds):
        start = n
        t1, t2 = _tangent_frame(n)
        n = along(n, t1, half)
        n = along(n, t2, half)
        disp = n - dot3(start, n) * start
        nd = float(norm3(disp))
        if nd > 1e-15:
            # search the line through start along the round's net move
            t = disp / nd
            t = t - dot3(t, n) * n
            nt = float(norm3(t))
            if nt > 1e-15:
                n = along(n, t / nt, half)
        moved = math.acos(min(1.0, abs(float(dot3(start, n)))))
        half = max(4.0 * moved, 1e-9)
        if moved < 1e-12:
            break
    return n


@dataclass
class ArgmaxResult:
    axis: np.ndarray
    rate: float
    grid_axis: np.ndarray
    grid_rate: float
    svd_axis: np.ndarray
    svd_rate: float
    degenerate: bool

    @property
    def axis_discrepancy(self):
        """Angle (rad) between refined and SVD axes, up to sign."""
        c = min(1.0, abs(float(dot3(self.axis, self.svd_axis))))
        return math.acos(c)

    @property
    def rate_discrepancy(self):
        if self.svd_rate == 0.0:
            return abs(self.rate - self.svd_rate)
        return abs(self.rate - self.svd_rate) / self.svd_rate

    def to_dict(self):
        return {
            "axis": [float(x) for x in self.axis],
            "rate": self.rate,
            "grid_axis": [float(x) for x in self.grid_axis],
            "grid_rate": self.grid_rate,
            "svd_axis": [float(x) for x in self.svd_axis],
            "svd_rate": self.svd_rate,
            "degenerate": self.degenerate,
            "axis_discrepancy_rad": self.axis_discrepancy,
            "rate_discrepancy_rel": self.rate_discrepancy,
        }


def argmax_axis(state, k, grid_points=100_000):
    """Brute-force maximum of Bob's purification rate, refined and checked against the SVD.

    The grid stage never looks at the singular vectors; the SVD answer
    ``(v_1, 4k sigma_1^2)`` is attached for comparison.
    """
    r = coefficients(state)
    c = correlation_matrix(r)
    pts = fibonacci_sphere(grid_points)
    dr = matvec3(c, pts)
    vals = 4.0 * k * dot3(dr, dr)
    order = np.argsort(vals)
    best, second = order[-1], order[-2]
    grid_axis = pts[best]
    grid_rate = float(vals[best])
    degenerate = bool(vals[best] - vals[second] < 1e-9)

    def q(n):
        d = matvec3(c, n)
        return 4.0 * k * float(dot3(d, d))

    spacing = math.sqrt(4.0 * math.pi / grid_points)
    if grid_rate > 0.0:
        n = _refine(q, grid_axis, 3.0 * spacing)
    else:
        n = grid_axis
    n = sign_normalize(n)
    s = svd3(c)
    svd_axis = s.v1
    return ArgmaxResult(
        axis=n,
        rate=q(n),
        grid_axis=sign_normalize(grid_axis),
        grid_rate=grid_rate,
        svd_axis=svd_axis,
        svd_rate=4.0 * k * float(s.sigma[0]) ** 2,
        degenerate=degenerate,
    )


# --- SVG heatmap ------------------------------------------------------------

def _color(x):
    """Map ``x`` in [0, 1] to a dark-blue to yellow ramp."""
    stops = ((0.0, (13, 8, 135)), (0.5, (204, 71, 120)), (1.0, (240, 249, 33)))
    x = min(1.0, max(0.0, x))
    for (x0, c0), (x1, c1) in zip(stops, stops[1:]):
        if x <= x1:
            u = 0.0 if x1 == x0 else (x - x0) / (x1 - x0)
            return "#%02x%02x%02x" % tuple(int(round(a + u * (b - a))) for a, b in zip(c0, c1))
    return "#%02x%02x%02x" % stops[-1][1]


def render_svg(rmap: RateMap, which="b", cell=2, title=None):
    """Equirectangular heatmap (theta across, phi down) with a linear colour scale.

    The scale minimum and maximum are printed in the figure text.
    """
    grid = rmap.rate_b if which == "b" else rmap.rate_a
    lo, hi = float(np.min(grid)), float(np.max(grid))
    span = hi - lo
    nz, na = grid.shape
    width, height = na * cell, nz * cell
    label = title or f"rate_{which} map, k={rmap.k:g}"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height + 40}" viewBox="0 0 {width} {height + 40}">',
        f"<title>{label}</title>",
    ]
    for i in range(nz):
        for j in range(na):
            u = 0.0 if span == 0.0 else (float(grid[i, j]) - lo) / span
            out.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" fill="{_color(u)}"/>')
    out.append(
        f'<text x="4" y="{height + 16}" font-size="12" font-family="monospace">'
        f"{label}; phi 0..pi (down), theta 0..2pi (across)</text>"
    )
    out.append(
        f'<text x="4" y="{height + 32}" font-size="12" font-family="monospace">'
        f"linear scale: min={lo:.9g} ({_color(0.0)}) max={hi:.9g} ({_color(1.0)})</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"

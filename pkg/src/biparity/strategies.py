"""Measurement-axis feedback rules and analytic purification rates.

All selectors take a state (or a ``(..., 4, 4)`` batch of coefficient
matrices) and return unit axes of shape ``(..., 3)``.  Degenerate inputs
(vanishing Bloch vector, vanishing correlations) are resolved by a
``degeneracy_policy``:

``"error"``
    raise :class:`DegenerateStateError`;
``"fallback_canonical"``
    return the z axis;
``"fallback_nested"``
    try the complementary rule once (Alice-rate rules fall back to the
    Bob-optimal axis and vice versa), then the z axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .linalg3 import (
    _complement,
    _projector,
    cross,
    dot3,
    matmul3,
    matvec3,
    norm3,
    sign_normalize,
    svd3,
    transpose3,
)
from .pauli import coefficients, correlation_matrix

__all__ = [
    "KINDS",
    "POLICIES",
    "DegenerateStateError",
    "StrategyConfig",
    "parse_strategy",
    "rate_alice",
    "rate_bob",
    "select_axis_bob_optimal",
    "select_axis_jacobs_alice",
    "select_axis_along_bloch",
    "select_axis_bob_deterministic",
    "select_axis_simultaneous",
]

KINDS = ("fixed", "along_bloch", "jacobs_alice", "bob_optimal", "bob_deterministic", "simultaneous_det")
POLICIES = ("error", "fallback_canonical", "fallback_nested")
ALIASES = {
    "jacobs": "jacobs_alice",
    "bob_opt": "bob_optimal",
    "bob_det": "bob_deterministic",
    "simultaneous": "simultaneous_det",
}
SHORT_NAMES = {"jacobs_alice": "jacobs", "bob_optimal": "bob_opt", "bob_deterministic": "bob_det", "simultaneous_det": "simultaneous"}

ZERO_TOL = 1e-12
PARALLEL_TOL = 1e-10
_Z = np.array([0.0, 0.0, 1.0])


class DegenerateStateError(ValueError):
    """A selector met a state for which its rule does not define an axis."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices


# --- rates -----------------------------------------------------------------

def rate_alice(state, axis, k):
    """Drift and noise coefficients of Alice's purity for measurement along ``axis``.

    ``dP_A = drift dt + noise dW`` with drift ``4k (1 - r_nI^2)(1 - |r_A|^2)``
    and noise ``r_nI (1 - |r_A|^2) sqrt(8k)``.
    """
    r = coefficients(state)
    a = r[..., 1:, 0]
    r_n = dot3(axis, a)
    mixed = 1.0 - dot3(a, a)
    return 4.0 * k * (1.0 - r_n * r_n) * mixed, r_n * mixed * math.sqrt(8.0 * k)


def rate_bob(state, axis, k):
    """Drift ``4k |C n|^2`` and noise ``(r_B . C n) sqrt(8k)`` of Bob's purity."""
    r = coefficients(state)
    dr = matvec3(correlation_matrix(r), axis)
    return 4.0 * k * dot3(dr, dr), dot3(r[..., 0, 1:], dr) * math.sqrt(8.0 * k)


# --- selectors -------------------------------------------------------------

def _check_policy(policy):
    if policy not in POLICIES:
        raise ValueError(f"unknown degeneracy policy {policy!r}; choose from {POLICIES}")


def _raise_if(degenerate, policy, what):
    if policy == "error" and np.any(degenerate):
        idx = np.argwhere(np.atleast_1d(degenerate)).ravel().tolist()
        raise DegenerateStateError(f"{what} (batch indices {idx})", idx)


def _best_in_plane(c, normal):
    """Axis orthogonal to ``normal`` maximising ``|C n|``; also flags a zero in-plane rate.

    Rows with a (near) zero ``normal`` must be masked by the caller; they are
    given the z axis as a placeholder normal here.
    """
    nn = norm3(normal)
    good = nn > ZERO_TOL
    nhat = np.where(good[..., None], normal / np.where(good, nn, 1.0)[..., None], _Z)
    p1, p2 = _complement(nhat)
    proj = _projector(p1, p2)
    s = svd3(matmul3(c, proj))
    v = matvec3(proj, s.v1)
    nv = norm3(v)
    zero = (s.sigma[..., 0] < ZERO_TOL) | (nv < 0.5)
    axis = np.where(zero[..., None], p1, v / np.where(zero, 1.0, nv)[..., None])
    return sign_normalize(axis), zero


def select_axis_bob_optimal(state, policy="fallback_nested"):
    """First right singular vector of the correlation matrix (fastest mean Bob purification)."""
    _check_policy(policy)
    r = coefficients(state)
    c = correlation_matrix(r)
    deg = np.sqrt(np.sum(c * c, axis=(-1, -2))) <= ZERO_TOL
    _raise_if(deg, policy, "correlation matrix vanishes; every axis gives zero Bob rate")
    axis = svd3(c).v1
    if np.any(deg):
        if policy == "fallback_nested":
            fb = select_axis_jacobs_alice(r, policy="fallback_canonical")
        else:
            fb = np.broadcast_to(_Z, axis.shape)
        axis = np.where(deg[..., None], fb, axis)
    return axis


def select_axis_jacobs_alice(state, policy="fallback_nested"):
    """Axis in the plane orthogonal to Alice's Bloch vector.

    Within that plane the direction with the largest Bob rate is taken.
    """
    _check_policy(policy)
    r = coefficients(state)
    a = r[..., 1:, 0]
    deg = norm3(a) <= ZERO_TOL
    _raise_if(deg, policy, "Alice's Bloch vector vanishes; the orthogonal plane is undefined")
    axis, _ = _best_in_plane(correlation_matrix(r), a)
    if np.any(deg):
        if policy == "fallback_nested":
            fb = select_axis_bob_optimal(r, policy="fallback_canonical")
        else:
            fb = np.broadcast_to(_Z, axis.shape)
        axis = np.where(deg[..., None], fb, axis)
    return axis


def select_axis_along_bloch(state, policy="fallback_nested"):
    """Measure along Alice's own Bloch vector."""
    _check_policy(policy)
    r = coefficients(state)
    a = r[..., 1:, 0]
    na = norm3(a)
    deg = na <= ZERO_TOL
    _raise_if(deg, policy, "Alice's Bloch vector vanishes; its direction is undefined")
    axis = a / np.where(deg, 1.0, na)[..., None]
    if np.any(deg):
        if policy == "fallback_nested":
            fb = select_axis_bob_optimal(r, policy="fallback_canonical")
        else:
            fb = np.broadcast_to(_Z, axis.shape)
        axis = np.where(deg[..., None], fb, axis)
    return axis


def select_axis_bob_deterministic(state, policy="fallback_nested", with_flag=False):
    """Fastest axis among those that make Bob's purity noise-free.

    The admissible axes are orthogonal to ``r_B' = C^T r_B``; the best one
    is the first right singular vector of ``C P`` with ``P`` the projector
    onto that plane.  With ``with_flag=True`` also returns a boolean that is
    set where no admissible axis gives a nonzero rate.
    """
    _check_policy(policy)
    r = coefficients(state)
    c = correlation_matrix(r)
    rbp = matvec3(transpose3(c), r[..., 0, 1:])
    deg = norm3(rbp) <= ZERO_TOL
    _raise_if(deg, policy, "r_B' = C^T r_B vanishes; Bob's purity is noise-free for every axis")
    axis, zero = _best_in_plane(c, rbp)
    if np.any(deg):
        if policy == "fallback_nested":
            fb = select_axis_bob_optimal(r, policy="fallback_nested")
        else:
            fb = np.broadcast_to(_Z, axis.shape)
        axis = np.where(deg[..., None], fb, axis)
        zero = np.where(deg, False, zero)
    if with_flag:
        return axis, zero
    return axis


def select_axis_simultaneous(state):
    """Axis making both Alice's and Bob's purity noise-free, ``∝ r_A x r_B'``.

    When the cross product vanishes the remaining constraint plane is used
    and the Bob-rate-maximising direction inside it is returned.
    """
    r = coefficients(state)
    c = correlation_matrix(r)
    a = r[..., 1:, 0]
    rbp = matvec3(transpose3(c), r[..., 0, 1:])
    cr = cross(a, rbp)
    ncr = norm3(cr)
    a_zero = norm3(a) <= ZERO_TOL
    b_zero = norm3(rbp) <= ZERO_TOL
    generic = (ncr > PARALLEL_TOL) & ~a_zero & ~b_zero

    axis = cr / np.where(generic, ncr, 1.0)[..., None]
    if not np.all(generic):
        # only the degenerate rows need the in-plane search
        rest = ~generic
        normal = np.where(a_zero[..., None], rbp, a)
        planar, _ = _best_in_plane(c[rest], normal[rest])
        axis = np.array(axis, copy=True)
        axis[rest] = planar
    both = a_zero & b_zero
    if np.any(both):
        fb = select_axis_bob_optimal(r, policy="fallback_nested")
        axis = np.where(both[..., None], fb, axis)
    return axis


# --- configured controllers ------------------------------------------------

@dataclass(frozen=True)
class StrategyConfig:
    """A named feedback rule plus its degeneracy policy.

    Calling the config on a state (or batch) returns the chosen axes.
    """

    kind: str
    fixed_axis: Optional[Tuple[float, float, float]] = None
    degeneracy_policy: str = "fallback_nested"
    _axis: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "kind", kind)
        _check_policy(self.degeneracy_policy)
        if kind == "fixed":
            if self.fixed_axis is None:
                raise ValueError("strategy 'fixed' needs fixed_axis")
            ax = np.asarray(self.fixed_axis, dtype=float)
            if ax.shape != (3,) or abs(float(norm3(ax)) - 1.0) > 1e-12:
                raise ValueError(f"fixed_axis must be a unit 3-vector, got {self.fixed_axis!r}")
            object.__setattr__(self, "fixed_axis", tuple(float(x) for x in ax))
            object.__setattr__(self, "_axis", ax)
        elif self.fixed_axis is not None:
            raise ValueError(f"fixed_axis only applies to strategy 'fixed', not {kind!r}")

    @property
    def name(self):
        if self.kind == "fixed":
            return "fixed:" + ",".join(repr(x) for x in self.fixed_axis)
        return SHORT_NAMES.get(self.kind, self.kind)

    def __call__(self, state):
        r = coefficients(state)
        p = self.degeneracy_policy
        if self.kind == "fixed":
            return np.broadcast_to(self._axis, r.shape[:-2] + (3,)).copy()
        if self.kind == "along_bloch":
            return select_axis_along_bloch(r, p)
        if self.kind == "jacobs_alice":
            return select_axis_jacobs_alice(r, p)
        if self.kind == "bob_optimal":
            return select_axis_bob_optimal(r, p)
        if self.kind == "bob_deterministic":
            return select_axis_bob_deterministic(r, p)
        return select_axis_simultaneous(r)

    def to_dict(self):
        return {"kind": self.kind, "fixed_axis": self.fixed_axis, "degeneracy_policy": self.degeneracy_policy}


def parse_strategy(text, degeneracy_policy="fallback_nested"):
    """Parse ``fixed:<x>,<y>,<z>`` or a rule name (``jacobs``, ``bob_opt``, ...).

    Fixed axes are normalised, so ``fixed:1,0,1`` means (x + z)/sqrt(2).
    """
    text = text.strip()
    if text.startswith("fixed"):
        _, _, rest = text.partition(":")
        try:
            ax = np.array([float(x) for x in rest.split(",")])
        except ValueError:
            raise ValueError(f"cannot parse fixed axis from {text!r}") from None
        if ax.shape != (3,) or not np.all(np.isfinite(ax)) or float(norm3(ax)) == 0.0:
            raise ValueError(f"fixed axis needs three finite components, not all zero: {text!r}")
        ax = ax / float(norm3(ax))
        return StrategyConfig("fixed", tuple(ax), degeneracy_policy)
    return StrategyConfig(text, None, degeneracy_policy)

"""Conditioned evolution of the two-qubit state under weak measurement of Alice's qubit.

Two Euler-Maruyama integrators are provided.  :func:`step_pauli` advances
the 16 real Pauli coefficients directly; :func:`step_dense` advances the
4x4 density matrix from the stochastic master equation

    d rho = -k [y, [y, rho]] dt + sqrt(2k) (y rho + rho y - 2 <y> rho) dW,
    y = (n . sigma) (x) I,

and serves as an independent cross-check of the first.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg3 import dot3, norm3
from .pauli import (
    PAULI,
    TwoQubitState,
    coefficient_name,
    coefficients,
    density_from_coefficients,
    validate,
)
from .rng import INCREMENT_KINDS, NoiseStream

__all__ = [
    "MAX_K_DT",
    "NumericalGuardError",
    "SimParams",
    "TrajectoryRecord",
    "step_pauli",
    "step_dense",
    "simulate_trajectory",
    "integrate_batch",
    "positivity_ok",
]

MAX_K_DT = 0.025
RECORD_POS_TOL = 1e-6


class NumericalGuardError(ValueError):
    """Step-size or finiteness guard tripped."""


@dataclass(frozen=True)
class SimParams:
    """Integration settings.

    ``k * dt`` above :data:`MAX_K_DT` is rejected unless
    ``allow_large_step`` is set, in which case a warning is issued.
    """

    k: float = 0.1
    dt: float = 1e-3
    t_final: float = 1.0
    seed: int = 0
    increments: str = "two_point"
    allow_large_step: bool = False

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"measurement strength k must be > 0 (got {self.k})")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0 (got {self.dt})")
        if not self.t_final >= 0:
            raise ValueError(f"t_final must be >= 0 (got {self.t_final})")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.increments not in INCREMENT_KINDS:
            raise ValueError(f"increments must be one of {INCREMENT_KINDS}")
        if self.k * self.dt > MAX_K_DT:
            msg = f"k*dt = {self.k * self.dt:g} exceeds {MAX_K_DT}; Euler steps may leave the physical set"
            if not self.allow_large_step:
                raise NumericalGuardError(msg + " (set allow_large_step to proceed)")
            warnings.warn(msg, RuntimeWarning, stacklevel=3)

    @property
    def n_steps(self):
        return int(math.ceil(self.t_final / self.dt - 1e-9))

    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def to_dict(self):
        return {
            "k": self.k,
            "dt": self.dt,
            "t_final": self.t_final,
            "seed": int(self.seed),
            "increments": self.increments,
            "allow_large_step": self.allow_large_step,
        }


def _check_axis(axis):
    axis = np.asarray(axis, dtype=float)
    if axis.shape[-1:] != (3,) or np.any(np.abs(norm3(axis) - 1.0) > 1e-12):
        raise ValueError("measurement axis must have unit norm (within 1e-12)")
    return axis


def _step_pauli(r, axis, k, dt, dw):
    """Unchecked batched coefficient step; ``dw`` broadcasts against ``r[..., 0, 0]``."""
    s8k = math.sqrt(8.0 * k)
    alice = r[..., 1:, :]  # rows X, Y, Z; columns I, X, Y, Z
    n = axis[..., :, None]
    # r_nj for j in I, X, Y, Z
    r_n = axis[..., 0, None] * alice[..., 0, :] + axis[..., 1, None] * alice[..., 1, :] + axis[..., 2, None] * alice[..., 2, :]
    r_ni = r_n[..., 0]
    r_i = r[..., 0, :]
    dw = np.asarray(dw, dtype=float)

    # components of the Alice rows orthogonal to n (the m1, m2 directions)
    perp = alice - n * r_n[..., None, :]
    d_perp = -(4.0 * k * dt + r_ni * s8k * dw)[..., None, None] * perp
    d_n = ((r_i - r_ni[..., None] * r_n) * s8k * dw[..., None])
    d_i = ((r_n - r_ni[..., None] * r_i) * s8k * dw[..., None])

    out = np.empty_like(r)
    out[..., 1:, :] = alice + d_perp + n * d_n[..., None, :]
    out[..., 0, :] = r_i + d_i
    return out


def step_pauli(state, axis, k, dt, dw):
    """One Euler-Maruyama step of the 16 coefficient equations.

    Alice's rows are split into the component along ``axis`` and the two
    orthogonal directions; the transverse part decays as
    ``-(4k dt + r_nI sqrt(8k) dW) r_mj`` while the longitudinal row and
    Bob's row receive the noise updates ``(r_Ij - r_nI r_nj) sqrt(8k) dW``
    and ``(r_nj - r_nI r_Ij) sqrt(8k) dW``.  ``r_II`` stays exactly 1.
    """
    single = isinstance(state, TwoQubitState)
    r = coefficients(state)
    if not np.all(np.isfinite(r)):
        raise NumericalGuardError("state contains non-finite coefficients")
    axis = _check_axis(axis)
    out = _step_pauli(r, axis, k, dt, dw)
    return TwoQubitState(out) if single else out


def _measurement_operator(axis):
    axis = np.asarray(axis, dtype=float)
    sig = (
        axis[..., 0, None, None] * PAULI[1]
        + axis[..., 1, None, None] * PAULI[2]
        + axis[..., 2, None, None] * PAULI[3]
    )
    eye = np.eye(2)
    # kron(sig, I) on the last two axes
    y = np.einsum("...ab,cd->...acbd", sig, eye)
    return y.reshape(y.shape[:-4] + (4, 4))


def _step_dense(rho, axis, k, dt, dw):
    y = _measurement_operator(axis)
    yr = y @ rho
    ry = rho @ y
    exp_y = np.trace(yr, axis1=-2, axis2=-1).real
    comm = y @ yr - 2.0 * y @ ry + ry @ y
    dw = np.asarray(dw, dtype=float)
    drho = -k * dt * comm + math.sqrt(2.0 * k) * dw[..., None, None] * (yr + ry - 2.0 * exp_y[..., None, None] * rho)
    out = rho + drho
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def step_dense(rho, axis, k, dt, dw):
    """One Euler-Maruyama step of the density-matrix SME, re-Hermitised."""
    rho = np.asarray(rho, dtype=complex)
    if not np.all(np.isfinite(rho)):
        raise NumericalGuardError("density matrix contains non-finite entries")
    herm = np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))))
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if herm > 1e-8 or np.any(np.abs(tr - 1.0) > 1e-8):
        raise ValueError("step_dense needs a Hermitian, unit-trace density matrix (tol 1e-8)")
    axis = _check_axis(axis)
    return _step_dense(rho, axis, k, dt, dw)


def positivity_ok(r, tol=RECORD_POS_TOL):
    """Batched check that the reconstructed density matrices have min eigenvalue >= -tol."""
    rho = density_from_coefficients(r)
    return np.linalg.eigvalsh(rho)[..., 0] >= -tol


# --- trajectories ----------------------------------------------------------

@dataclass
class TrajectoryRecord:
    """One conditioned trajectory.

    Row ``t`` holds the state at ``times[t]``, the axis chosen there and the
    increment drawn to leave it; the last row has no outgoing step, so its
    axis and ``dW`` are NaN.
    """

    times: np.ndarray
    states: np.ndarray  # (n + 1, 4, 4) coefficients
    axes: np.ndarray
    noises: np.ndarray
    purities_a: np.ndarray
    purities_b: np.ndarray
    positivity_flagged: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i):
        return TwoQubitState(self.states[i])

    @property
    def r_ni(self):
        """Alice's expectation of the measured observable at each step."""
        return dot3(self.axes, self.states[:, 1:, 0])

    def to_csv(self, path=None):
        names = [coefficient_name(i, j) for i in range(4) for j in range(4)]
        header = ["t", *names, "n_x", "n_y", "n_z", "dW", "P_A", "P_B"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for t in range(len(self.times)):
            row = [self.times[t], *self.states[t].ravel(), *self.axes[t], self.noises[t], self.purities_a[t], self.purities_b[t]]
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _purities(r):
    a = r[..., 1:, 0]
    b = r[..., 0, 1:]
    return 0.5 * (1.0 + dot3(a, a)), 0.5 * (1.0 + dot3(b, b))


@dataclass
class BatchResult:
    purities_a: np.ndarray  # (batch, n + 1)
    purities_b: np.ndarray
    flagged: np.ndarray  # (batch,) bool
    final: np.ndarray  # (batch, 4, 4)
    states: Optional[np.ndarray] = None  # (batch, n + 1, 4, 4)
    axes: Optional[np.ndarray] = None  # (batch, n + 1, 3)


def integrate_batch(r0, controller: Callable, params: SimParams, noise, record_states=False, check_positivity=True, check_every=1):
    """Integrate a batch of trajectories with precomputed increments.

    ``noise`` has shape ``(batch, n_steps)``.  Row ``b`` of the result
    depends only on ``r0[b]`` and ``noise[b]``, not on the batch it is in.
    Positivity is checked on every ``check_every``-th state and the last.
    """
    r = np.array(r0, dtype=float)
    if r.ndim == 2:
        r = r[None]
    noise = np.asarray(noise, dtype=float)
    batch, n = noise.shape
    pa = np.empty((batch, n + 1))
    pb = np.empty((batch, n + 1))
    flagged = np.zeros(batch, dtype=bool)
    states = np.empty((batch, n + 1, 4, 4)) if record_states else None
    axes = np.full((batch, n + 1, 3), np.nan) if record_states else None

    pa[:, 0], pb[:, 0] = _purities(r)
    if record_states:
        states[:, 0] = r
    if check_positivity:
        flagged |= ~positivity_ok(r)
    for t in range(n):
        try:
            ax = controller(r)
        except ValueError as exc:
            raise type(exc)(f"step {t}: {exc}") from exc
        r = _step_pauli(r, ax, params.k, params.dt, noise[:, t])
        if not np.all(np.isfinite(r)):
            raise NumericalGuardError(f"step {t}: non-finite coefficients")
        pa[:, t + 1], pb[:, t + 1] = _purities(r)
        if check_positivity and ((t + 1) % check_every == 0 or t + 1 == n):
            flagged |= ~positivity_ok(r)
        if record_states:
            axes[:, t] = ax
            states[:, t + 1] = r
    return BatchResult(pa, pb, flagged, r, states, axes)


def simulate_trajectory(initial, controller, params: SimParams, rng_stream=None, check_positivity=True):
    """Run one conditioned trajectory with feedback from ``controller``.

    ``rng_stream`` is a :class:`~biparity.rng.NoiseStream`; by default
    stream 0 of ``params.seed`` is used, which is also what trajectory 0 of
    an ensemble sees.
    """
    state = initial if isinstance(initial, TwoQubitState) else TwoQubitState(initial)
    problems = validate(state)
    if problems:
        from .pauli import StateValidationError

        raise StateValidationError("; ".join(problems))
    stream = rng_stream if rng_stream is not None else NoiseStream(params.seed, 0)
    noise = stream.increments(params.n_steps, params.dt, params.increments)
    res = integrate_batch(state.r, controller, params, noise[None, :], record_states=True, check_positivity=check_positivity)
    noises = np.concatenate([noise, [np.nan]])
    return TrajectoryRecord(
        times=params.times(),
        states=res.states[0],
        axes=res.axes[0],
        noises=noises,
        purities_a=res.purities_a[0],
        purities_b=res.purities_b[0],
        positivity_flagged=bool(res.flagged[0]),
        meta={"seed": stream.seed, "index": stream.index},
    )

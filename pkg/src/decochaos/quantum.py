"""Grid wavepackets evolving under the system Hamiltonian alone.

Propagation uses second-order operator splitting between the kinetic
phase (applied in momentum space via FFT) and the potential phase
(applied in position space). Each step is unitary by construction, so
the norm is conserved to roundoff; accuracy is controlled by the step
size. The module also provides the packet moments that drive the bath
and the break-time diagnostic that bounds how long those moments track
the classical orbit.

Parameters
----------
The effective Planck constant ``hbar_eff`` is a free dial of the grid;
shrinking it narrows the minimum-uncertainty packets and lengthens the
window in which mean positions follow classical trajectories.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (BoundaryLeakError, DomainError, GridError,
                     GridMismatchError, NormDriftError)
from .models import HamiltonianModel, PhasePoint
from .series import ExpectationSeries, Trajectory

__all__ = [
    "Grid2D",
    "WavepacketState",
    "init_gaussian",
    "propagate_wavepacket",
    "ehrenfest_break_time",
    "save_wavepacket",
    "load_wavepacket",
]

BOUNDARY_DENSITY_TOL = 1e-10
NORM_DRIFT_TOL = 1e-8


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class Grid2D:
    """Periodic position grid with matching Fourier momentum grid.

    Parameters
    ----------
    nx, ny : int
        Point counts, powers of two, at least 64 each.
    lx, ly : float
        Box lengths; the box is centered on the origin.
    hbar_eff : float
        Effective Planck constant used by every operator on this grid.
    """

    def __init__(self, nx: int, ny: int, lx: float, ly: float,
                 hbar_eff: float = 1.0):
        if not (_is_pow2(nx) and _is_pow2(ny) and nx >= 64 and ny >= 64):
            raise GridError("nx and ny must be powers of two, at least 64")
        if not (lx > 0 and ly > 0 and math.isfinite(lx) and math.isfinite(ly)):
            raise GridError("box lengths must be positive finite")
        if not (hbar_eff > 0 and math.isfinite(hbar_eff)):
            raise GridError("hbar_eff must be positive finite")
        self.nx, self.ny = int(nx), int(ny)
        self.lx, self.ly = float(lx), float(ly)
        self.hbar = float(hbar_eff)
        self.dx = self.lx / self.nx
        self.dy = self.ly / self.ny
        self.x = (np.arange(self.nx) - self.nx // 2) * self.dx
        self.y = (np.arange(self.ny) - self.ny // 2) * self.dy
        self.X, self.Y = np.meshgrid(self.x, self.y, indexing="ij")
        kx = 2.0 * math.pi * np.fft.fftfreq(self.nx, d=self.dx)
        ky = 2.0 * math.pi * np.fft.fftfreq(self.ny, d=self.dy)
        self.KX, self.KY = np.meshgrid(kx, ky, indexing="ij")
        self.k2 = self.KX ** 2 + self.KY ** 2

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def __eq__(self, other):
        return (isinstance(other, Grid2D)
                and (self.nx, self.ny, self.lx, self.ly, self.hbar)
                == (other.nx, other.ny, other.lx, other.ly, other.hbar))


@dataclass
class WavepacketState:
    """Complex amplitudes on a Grid2D at a moment in time."""

    grid: Grid2D
    psi: np.ndarray
    t: float = 0.0

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.cell_area)

    def edge_density(self) -> float:
        """Largest per-cell probability along the box boundary."""
        rho = np.abs(self.psi) ** 2 * self.grid.cell_area
        return float(max(rho[0, :].max(), rho[-1, :].max(),
                         rho[:, 0].max(), rho[:, -1].max()))


def init_gaussian(grid: Grid2D, z: PhasePoint, widths) -> WavepacketState:
    """Normalized minimum-uncertainty Gaussian centered on z.

    widths = (sigma_x, sigma_y) are the position standard deviations;
    the momentum spreads are hbar_eff / (2 sigma). Widths must exceed
    two grid cells and stay below a tenth of the box.
    """
    sx, sy = float(widths[0]), float(widths[1])
    if sx <= 2.0 * grid.dx or sy <= 2.0 * grid.dy:
        raise GridError(f"widths ({sx:g}, {sy:g}) must exceed two grid cells "
                        f"({2 * grid.dx:g}, {2 * grid.dy:g})")
    if sx >= grid.lx / 10.0 or sy >= grid.ly / 10.0:
        raise GridError("widths must stay below a tenth of the box")
    dx_ = grid.X - z.qx
    dy_ = grid.Y - z.qy
    phase = (z.px * grid.X + z.py * grid.Y) / grid.hbar
    psi = np.exp(-dx_ ** 2 / (4.0 * sx * sx) - dy_ ** 2 / (4.0 * sy * sy)
                 + 1j * phase)
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * grid.cell_area)
    return WavepacketState(grid, psi, 0.0)


def _position_moments(grid, psi):
    rho = (psi.real ** 2 + psi.imag ** 2) * grid.cell_area
    mx = float(np.sum(rho * grid.X))
    my = float(np.sum(rho * grid.Y))
    vx = float(np.sum(rho * (grid.X - mx) ** 2))
    vy = float(np.sum(rho * (grid.Y - my) ** 2))
    return mx, my, vx, vy


def _momentum_moments(grid, psi):
    phi = np.fft.fft2(psi)
    w = phi.real ** 2 + phi.imag ** 2
    w /= np.sum(w)
    px = grid.hbar * float(np.sum(w * grid.KX))
    py = grid.hbar * float(np.sum(w * grid.KY))
    vx = float(np.sum(w * (grid.hbar * grid.KX - px) ** 2))
    vy = float(np.sum(w * (grid.hbar * grid.KY - py) ** 2))
    return px, py, vx, vy


def propagate_wavepacket(state: WavepacketState, model: HamiltonianModel,
                         dt: float, n_steps: int, sample_every: int = 1,
                         track_momentum: bool = False,
                         boundary_tol: float = BOUNDARY_DENSITY_TOL,
                         norm_tol: float = NORM_DRIFT_TOL):
    """Split-step evolution under the bare system Hamiltonian.

    Applies exp(-i V dt / 2 hbar), a full kinetic phase in momentum
    space, and exp(-i V dt / 2 hbar) per step; samples position means
    and variances every ``sample_every`` steps (momentum moments too
    when ``track_momentum``). Norm drift beyond ``norm_tol`` and edge
    density beyond ``boundary_tol`` abort the run.

    Returns
    -------
    (ExpectationSeries, WavepacketState)
        The sampled moments and the final state.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError("dt must be positive finite")
    if not (isinstance(n_steps, int) and n_steps >= 1):
        raise DomainError("n_steps must be an integer >= 1")
    if not (isinstance(sample_every, int) and sample_every >= 1
            and n_steps % sample_every == 0):
        raise DomainError("sample_every must divide n_steps")
    grid = state.grid
    hbar = grid.hbar
    V = model.potential_xy(grid.X, grid.Y)
    half_v = np.exp(-0.5j * dt * V / hbar)
    kinetic = np.exp(-0.5j * dt * hbar * grid.k2 / model.mass)

    n_samples = n_steps // sample_every + 1
    t = state.t + dt * sample_every * np.arange(n_samples)
    mean_q = np.empty((n_samples, 2))
    var_q = np.empty((n_samples, 2))
    mean_p = np.empty((n_samples, 2)) if track_momentum else None
    var_p = np.empty((n_samples, 2)) if track_momentum else None

    psi = state.psi.copy()

    def record(idx):
        mx, my, vx, vy = _position_moments(grid, psi)
        mean_q[idx] = (mx, my)
        var_q[idx] = (vx, vy)
        if track_momentum:
            px, py, vpx, vpy = _momentum_moments(grid, psi)
            mean_p[idx] = (px, py)
            var_p[idx] = (vpx, vpy)
        nrm = float(np.sum(psi.real ** 2 + psi.imag ** 2) * grid.cell_area)
        if abs(nrm - 1.0) > norm_tol:
            raise NormDriftError(
                f"norm drifted to {nrm!r} at t={t[idx]:g}")
        rho_edge = (psi.real ** 2 + psi.imag ** 2) * grid.cell_area
        edge = max(rho_edge[0, :].max(), rho_edge[-1, :].max(),
                   rho_edge[:, 0].max(), rho_edge[:, -1].max())
        if edge > boundary_tol:
            raise BoundaryLeakError(
                f"edge density {edge:g} exceeds {boundary_tol:g} at "
                f"t={t[idx]:g}; enlarge the box")

    record(0)
    for step in range(1, n_steps + 1):
        psi *= half_v
        psi = np.fft.ifft2(kinetic * np.fft.fft2(psi))
        psi *= half_v
        if step % sample_every == 0:
            record(step // sample_every)

    series = ExpectationSeries(t, mean_q, var_q, mean_p=mean_p, var_p=var_p)
    return series, WavepacketState(grid, psi, float(t[-1]))


def ehrenfest_break_time(qseries: ExpectationSeries, traj: Trajectory,
                         threshold: float):
    """First time the packet mean strays from the classical orbit.

    The classical positions are linearly resampled onto the quantum
    grid, which must lie inside the trajectory's span. Returns the
    crossing time (linearly interpolated between samples) or None if
    the deviation never exceeds threshold in the window.
    """
    if not (threshold > 0 and math.isfinite(threshold)):
        raise DomainError("threshold must be positive finite")
    tq = qseries.t
    pad = 1e-9 * max(1.0, abs(float(traj.t[-1])))
    if tq[0] < traj.t[0] - pad or tq[-1] > traj.t[-1] + pad:
        raise GridMismatchError(
            f"classical trajectory covers [{traj.t[0]:g}, {traj.t[-1]:g}] "
            f"but the quantum series spans [{tq[0]:g}, {tq[-1]:g}]")
    cx = np.interp(tq, traj.t, traj.z[:, 0])
    cy = np.interp(tq, traj.t, traj.z[:, 1])
    dev = np.hypot(qseries.mean_q[:, 0] - cx, qseries.mean_q[:, 1] - cy)
    over = np.nonzero(dev > threshold)[0]
    if over.size == 0:
        return None
    i = int(over[0])
    if i == 0:
        return float(tq[0])
    frac = (threshold - dev[i - 1]) / (dev[i] - dev[i - 1])
    return float(tq[i - 1] + frac * (tq[i] - tq[i - 1]))


def save_wavepacket(state: WavepacketState, path) -> None:
    """Write psi as row-major little-endian complex128 with a text header.

    The sidecar ``<path>.hdr`` holds nx, ny, lx, ly, hbar_eff and t, one
    ``name value`` pair per line.
    """
    g = state.grid
    state.psi.astype("<c16").tofile(path)
    with open(f"{path}.hdr", "w", encoding="ascii") as fh:
        for key, val in (("nx", g.nx), ("ny", g.ny), ("lx", g.lx),
                         ("ly", g.ly), ("hbar_eff", g.hbar), ("t", state.t)):
            fh.write(f"{key} {val!r}\n")


def load_wavepacket(path) -> WavepacketState:
    """Inverse of save_wavepacket."""
    fields = {}
    with open(f"{path}.hdr", encoding="ascii") as fh:
        for line in fh:
            key, val = line.split()
            fields[key] = val
    grid = Grid2D(int(fields["nx"]), int(fields["ny"]),
                  float(fields["lx"]), float(fields["ly"]),
                  float(fields["hbar_eff"]))
    psi = np.fromfile(path, dtype="<c16").reshape(grid.nx, grid.ny)
    return WavepacketState(grid, psi.astype(complex), float(fields["t"]))

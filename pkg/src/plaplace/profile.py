"""Radial grids and sampled radial profiles.

A profile stores u, u_r and the flux w = r^(N-1) |u_r|^(p-2) u_r on a
grid of radii in (0, 1]; u_rr and u_rrr are optional.  Interpolation is
done in t = log r, where geometric grids are uniform.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import DomainError


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii in (0, 1] ending exactly at 1."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)) or nodes[0] <= 0.0:
            raise DomainError("grid nodes must be finite and positive")
        if nodes[-1] != 1.0:
            raise DomainError(f"last grid node must be exactly 1, got {nodes[-1]!r}")
        if np.any(np.diff(nodes) <= 0.0):
            raise DomainError("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def geometric(cls, r_min=1e-6, n_geometric=3000, n_uniform=1000, r_split=0.5):
        """Geometric nodes on [r_min, r_split], uniform nodes on [r_split, 1]."""
        if not 0.0 < r_min < r_split < 1.0:
            raise DomainError("need 0 < r_min < r_split < 1")
        if n_geometric < 2 or n_uniform < 1:
            raise DomainError("node counts too small")
        geo = np.geomspace(r_min, r_split, n_geometric)
        uni = np.linspace(r_split, 1.0, n_uniform + 1)
        nodes = np.concatenate((geo[:-1], uni))
        nodes[-1] = 1.0
        return cls(nodes)

    @property
    def r_min(self):
        return float(self.nodes[0])

    @property
    def count(self):
        return int(self.nodes.size)

    @property
    def max_ratio(self):
        return float(np.max(self.nodes[1:] / self.nodes[:-1]))

    def count_in(self, lo, hi):
        return int(np.count_nonzero((self.nodes >= lo) & (self.nodes <= hi)))

    def refined(self):
        """Insert the geometric mean between every pair of nodes."""
        mids = np.sqrt(self.nodes[:-1] * self.nodes[1:])
        nodes = np.empty(2 * self.nodes.size - 1)
        nodes[0::2] = self.nodes
        nodes[1::2] = mids
        return RadialGrid(nodes)

    def merged(self, extra):
        """Grid with extra radii in (r_min, 1) inserted."""
        extra = np.asarray(extra, dtype=float).ravel()
        extra = extra[(extra > self.nodes[0]) & (extra < 1.0)]
        nodes = np.unique(np.concatenate((self.nodes, extra)))
        # drop near-duplicates that would make interpolation ill-posed
        keep = np.concatenate(([True], np.diff(nodes) > 1e-14 * nodes[1:]))
        keep[-1] = True
        nodes = nodes[keep]
        nodes[-1] = 1.0
        return RadialGrid(nodes)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A radial solution sampled on a RadialGrid."""

    grid: RadialGrid
    u: np.ndarray
    u_r: np.ndarray
    w: np.ndarray
    N: int
    p: float
    u_rr: np.ndarray = None
    u_rrr: np.ndarray = None
    spec: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.grid.count
        for name in ("u", "u_r", "w", "u_rr", "u_rrr"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = _frozen(value)
            if arr.shape != (n,):
                raise DomainError(f"{name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_derivative(cls, grid, u, u_r, N, p, **kwargs):
        """Build a profile computing the flux from u_r."""
        u_r = np.asarray(u_r, dtype=float)
        w = flux(grid.nodes, u_r, N, p)
        return cls(grid=grid, u=u, u_r=u_r, w=w, N=N, p=p, **kwargs)

    @property
    def r(self):
        return self.grid.nodes

    def with_derivatives(self, u_rr, u_rrr):
        return replace(self, u_rr=u_rr, u_rrr=u_rrr)

    def with_meta(self, **items):
        meta = dict(self.meta)
        meta.update(items)
        return replace(self, meta=meta)

    def flux_consistency(self):
        """Max relative mismatch between |w| and r^(N-1)|u_r|^(p-1)."""
        expected = flux(self.r, self.u_r, self.N, self.p)
        scale = np.maximum(np.abs(expected), np.finfo(float).tiny)
        return float(np.max(np.abs(np.abs(self.w) - np.abs(expected)) / scale))

    def field(self, name):
        value = {"u": self.u, "u_r": self.u_r, "u_rr": self.u_rr, "u_rrr": self.u_rrr, "w": self.w}[name]
        if value is None:
            raise DomainError(f"profile has no {name} samples")
        return value

    @cached_property
    def interpolant(self):
        return ProfileInterpolant(self)


def flux(r, u_r, N, p):
    """w = r^(N-1) |u_r|^(p-2) u_r, written to stay finite when u_r = 0."""
    u_r = np.asarray(u_r, dtype=float)
    return np.sign(u_r) * np.asarray(r, dtype=float) ** (N - 1) * np.abs(u_r) ** (p - 1)


class ProfileInterpolant:
    """Piecewise-cubic interpolation of a profile in t = log r."""

    def __init__(self, profile):
        r = profile.r
        t = np.log(r)
        self.r_min = float(r[0])
        self._u = CubicHermiteSpline(t, profile.u, r * profile.u_r, extrapolate=False)
        if profile.u_rr is not None:
            self._ur = CubicHermiteSpline(t, profile.u_r, r * profile.u_rr, extrapolate=False)
        else:
            self._ur = CubicSpline(t, profile.u_r, extrapolate=False)

    def _t(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_min * (1 - 1e-14)) or np.any(r > 1.0 + 1e-14):
            raise DomainError("radius outside the profile grid")
        return np.log(np.clip(r, self.r_min, 1.0))

    def u(self, r):
        return self._u(self._t(r))

    def u_r(self, r):
        return self._ur(self._t(r))

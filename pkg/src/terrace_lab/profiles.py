"""Sampled one-dimensional fields on uniform grids.

A Profile stores either one period of an L-periodic function (evaluation
wraps) or a plain field on a finite interval (evaluation clamps at the ends).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass
class Profile:
    values: np.ndarray
    dx: float
    x0: float = 0.0
    periodic: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ConfigurationError("Profile.values must be a 1-D array with >= 2 samples")
        if not np.isfinite(self.values).all():
            raise ConfigurationError("Profile.values must contain finite entries only")
        if not (self.dx > 0):
            raise ConfigurationError("Profile.dx must be > 0")

    # -- geometry -----------------------------------------------------------

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def period(self) -> float:
        """Stored period n*dx (periodic profiles store exactly one period)."""
        if not self.periodic:
            raise ConfigurationError("period is only defined for periodic profiles")
        return self.n * self.dx

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        """Linear interpolation; wraps if periodic, clamps otherwise."""
        x = np.asarray(x, dtype=float)
        if self.periodic:
            L = self.period
            xm = np.mod(x - self.x0, L)
            grid = self.dx * np.arange(self.n + 1)
            vals = np.append(self.values, self.values[0])
            return np.interp(xm, grid, vals)
        return np.interp(x, self.x, self.values)

    def on_grid(self, x: np.ndarray) -> np.ndarray:
        return self(x)

    # -- convenience --------------------------------------------------------

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def copy(self) -> "Profile":
        return Profile(self.values.copy(), self.dx, self.x0, self.periodic)

    def resample(self, n: int) -> "Profile":
        """Resample to n points (periodic profiles keep one period)."""
        if self.periodic:
            xs = self.x0 + np.arange(n) * (self.period / n)
            return Profile(self(xs), self.period / n, self.x0, True)
        xs = np.linspace(self.x0, self.x[-1], n)
        return Profile(self(xs), xs[1] - xs[0], self.x0, False)

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> None:
        data = np.column_stack([self.x, self.values])
        header = "x,value"
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, periodic: bool = False) -> "Profile":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        x, v = data[:, 0], data[:, 1]
        dxs = np.diff(x)
        if dxs.size == 0 or not np.allclose(dxs, dxs[0], rtol=1e-9, atol=1e-12):
            raise ConfigurationError(f"{path}: profile CSV must use a uniform x grid")
        return cls(v, float(dxs[0]), float(x[0]), periodic)


def constant_profile(value: float, L: float, n: int = 256, x0: float = 0.0) -> Profile:
    """One period of a constant function, stored on n points."""
    return Profile(np.full(n, float(value)), L / n, x0, periodic=True)

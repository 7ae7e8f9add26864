"""Manufactured solutions of the clamped plate problem on the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from ..errors import InvalidParameterError

__all__ = ["ManufacturedCase", "PolynomialFunction", "manufactured_case", "CASES", "bilaplacian_fd"]


class PolynomialFunction:
    """Bivariate polynomial sum c[a, b] x^a y^b with value/gradient/hessian/bilaplacian."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)

    @classmethod
    def random(cls, k, rng):
        c = np.zeros((k + 1, k + 1))
        for a in range(k + 1):
            c[a, : k + 1 - a] = rng.standard_normal(k + 1 - a)
        return cls(c)

    def _d(self, dx, dy):
        c = self.coeffs
        if dx:
            c = npoly.polyder(c, dx, axis=0)
        if dy:
            c = npoly.polyder(c, dy, axis=1)
        return c

    def partial(self, points, dx=0, dy=0):
        points = np.atleast_2d(points)
        return npoly.polyval2d(points[:, 0], points[:, 1], self._d(dx, dy))

    def value(self, points):
        return self.partial(points)

    __call__ = value

    def gradient(self, points):
        return np.column_stack([self.partial(points, 1, 0), self.partial(points, 0, 1)])

    def hessian(self, points):
        xx, xy, yy = self.partial(points, 2, 0), self.partial(points, 1, 1), self.partial(points, 0, 2)
        return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)

    def laplacian(self, points):
        return self.partial(points, 2, 0) + self.partial(points, 0, 2)

    def bilaplacian(self, points):
        return self.partial(points, 4, 0) + 2 * self.partial(points, 2, 2) + self.partial(points, 0, 4)

    load = bilaplacian


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution u = a(x) a(y) with closed-form derivatives and load f = bilaplacian(u).

    ``factor`` returns (a, a', a'', a''', a'''') at the given coordinates.
    """

    name: str
    factor: object
    domain: str = "unit-square"

    def _parts(self, points):
        points = np.atleast_2d(points)
        return self.factor(points[:, 0]), self.factor(points[:, 1])

    def value(self, points):
        ax, ay = self._parts(points)
        return ax[0] * ay[0]

    __call__ = value

    def gradient(self, points):
        ax, ay = self._parts(points)
        return np.column_stack([ax[1] * ay[0], ax[0] * ay[1]])

    def hessian(self, points):
        ax, ay = self._parts(points)
        xx, xy, yy = ax[2] * ay[0], ax[1] * ay[1], ax[0] * ay[2]
        return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)

    def load(self, points):
        ax, ay = self._parts(points)
        return ax[4] * ay[0] + 2 * ax[2] * ay[2] + ax[0] * ay[4]


def _sine_squared(t):
    s, c = np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)
    p = np.pi
    return (np.sin(p * t) ** 2, p * s, 2 * p**2 * c, -4 * p**3 * s, -8 * p**4 * c)


def _bubble(t):
    # x^2 (1 - x)^2 = x^2 - 2x^3 + x^4
    return (
        t**2 * (1 - t) ** 2,
        2 * t - 6 * t**2 + 4 * t**3,
        2 - 12 * t + 12 * t**2,
        -12 + 24 * t,
        np.full_like(t, 24.0),
    )


CASES = {
    "sine-squared": _sine_squared,
    "polynomial-bubble": _bubble,
}


def manufactured_case(name):
    try:
        factor = CASES[name]
    except KeyError:
        raise InvalidParameterError(f"unknown manufactured case {name!r}; choose from {sorted(CASES)}") from None
    return ManufacturedCase(name, factor)


def bilaplacian_fd(func, points, step=1e-2):
    """Bilaplacian by a 13-point finite-difference stencil, O(step^2) accurate."""
    points = np.atleast_2d(points)
    x, y = points[:, 0], points[:, 1]
    h = step

    def u(dx, dy):
        return func(np.column_stack([x + dx * h, y + dy * h]))

    center = 20 * u(0, 0)
    axis = -8 * (u(1, 0) + u(-1, 0) + u(0, 1) + u(0, -1))
    diag = 2 * (u(1, 1) + u(1, -1) + u(-1, 1) + u(-1, -1))
    far = u(2, 0) + u(-2, 0) + u(0, 2) + u(0, -2)
    return (center + axis + diag + far) / h**4

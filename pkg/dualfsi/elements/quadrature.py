"""Gauss rules and bilinear shape functions on the reference square."""
import numpy as np

_G = 1.0 / np.sqrt(3.0)

# corner order matches the counter-clockwise element connectivity
CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])

GAUSS_2X2_POINTS = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
GAUSS_2X2_WEIGHTS = np.ones(4)

_G3 = np.sqrt(0.6)
GAUSS_1D_3_POINTS = np.array([-_G3, 0.0, _G3])
GAUSS_1D_3_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0


def gauss_3x3():
    """Tensor 3x3 rule as (points (9, 2), weights (9,))."""
    xi, eta = np.meshgrid(GAUSS_1D_3_POINTS, GAUSS_1D_3_POINTS)
    wx, wy = np.meshgrid(GAUSS_1D_3_WEIGHTS, GAUSS_1D_3_WEIGHTS)
    return np.column_stack([xi.ravel(), eta.ravel()]), (wx * wy).ravel()


def q1_shapes(points: np.ndarray) -> np.ndarray:
    """(n_points, 4) bilinear shape values."""
    points = np.atleast_2d(points)
    return 0.25 * (1.0 + points[:, None, 0] * CORNERS[None, :, 0]) * (
        1.0 + points[:, None, 1] * CORNERS[None, :, 1]
    )


def q1_derivatives(points: np.ndarray) -> np.ndarray:
    """(n_points, 4, 2) derivatives with respect to (xi, eta)."""
    points = np.atleast_2d(points)
    xi = points[:, None, 0]
    eta = points[:, None, 1]
    dxi = 0.25 * CORNERS[None, :, 0] * (1.0 + eta * CORNERS[None, :, 1])
    deta = 0.25 * CORNERS[None, :, 1] * (1.0 + xi * CORNERS[None, :, 0])
    return np.stack([dxi, deta], axis=-1)


SHAPES_2X2 = q1_shapes(GAUSS_2X2_POINTS)
DSHAPES_2X2 = q1_derivatives(GAUSS_2X2_POINTS)

"""Central finite differences used by the first-order optimality checks"""

import numpy as np

from .errors import ConfigurationError

ACCURACY_ORDERS = (2, 4, 6, 8)


def get_deltah_multipliers(accuracy_order):
    """Get the step multipliers of the central stencil"""
    _check_order(accuracy_order)
    half = accuracy_order // 2
    return np.arange(-half, half + 1, dtype=float)


def get_coefficients(accuracy_order):
    """Get the first derivative coefficients of the central stencil"""
    _check_order(accuracy_order)
    first_derivative_coeffs = [[-0.5, 0., 0.5],
                               [1. / 12, -2. / 3, 0., 2. / 3, -1. / 12],
                               [-1. / 60, 3. / 20, -3. / 4, 0., 3. / 4, -3. / 20, 1. / 60],
                               [1. / 280, -4. / 105, 1. / 5, -4. / 5, 0., 4. / 5, -1. / 5, 4. / 105, -1. / 280]]
    return np.array(first_derivative_coeffs[accuracy_order // 2 - 1])


def _check_order(accuracy_order):
    if accuracy_order not in ACCURACY_ORDERS:
        raise ConfigurationError(f"accuracy order must be one of {ACCURACY_ORDERS}, got {accuracy_order}")


def finite_difference(fxn, x0, h, accuracy_order=2):
    """Directional derivative of ``fxn`` at ``x0`` along the step ``h``

    :param callable fxn: The function to differentiate
    :param x0: The evaluation point (scalar or array)
    :param h: A scalar step, or a step vector whose norm sets the denominator
    :param int accuracy_order: The order of the central stencil
    """
    deltah_multipliers = get_deltah_multipliers(accuracy_order)
    coefficients = get_coefficients(accuracy_order)
    hden = float(np.linalg.norm(h)) if np.ndim(h) else float(h)
    return sum(C * fxn(x0 + h * dhm) for C, dhm in zip(coefficients, deltah_multipliers) if abs(C) > 0) / hden


def numeric_gradient(fxn, x0, h, accuracy_order=2):
    """Gradient of a scalar (or Jacobian of a vector) function of many variables

    :param callable fxn: The function in question
    :param np.ndarray x0: The point to compute the gradient at
    :param float h: The perturbation applied to each coordinate
    :param int accuracy_order: The accuracy of the stencil
    """
    x0 = np.asarray(x0, dtype=float)
    hvecs = h * np.eye(len(x0))
    return np.array([finite_difference(fxn, x0, hvecs[i], accuracy_order=accuracy_order) for i in range(len(x0))])

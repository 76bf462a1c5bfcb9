"""Closed-form profiles on the real line, vectorized over numpy arrays.

Everything here is a plain function of coordinates; sampling onto a Grid
happens in core.profiles.
"""
import numpy as np

from config.settings import KERNEL_TAYLOR_FRACTION


# Soliton Q(x) = 4 / (1 + x^2) and its scaled family Q_c(x) = c Q(c x)

def q(x):
    return 4.0 / (1.0 + np.square(x))


def q_prime(x):
    return -8.0 * x / np.square(1.0 + np.square(x))


def q_second(x):
    x2 = np.square(x)
    return -8.0 * (1.0 - 3.0 * x2) / (1.0 + x2) ** 3


def q_scaled(x, c: float, order: int = 0):
    """c^(order+1) Q^(order)(c x)"""
    base = (q, q_prime, q_second)[order]
    return c ** (order + 1) * base(c * np.asarray(x, dtype=np.float64))


def s_profile(x):
    """S = (xQ)' = Q^2/2 - Q"""
    x2 = np.square(x)
    return 4.0 * (1.0 - x2) / np.square(1.0 + x2)


def t_profile(x):
    return s_profile(x) - q(x)


# Weight phi_A(x) = pi/2 + arctan(x/A) and friends

def phi(x, A: float):
    return 0.5 * np.pi + np.arctan(x / A)


def phi_prime(x, A: float):
    return (1.0 / A) / (1.0 + np.square(x / A))


def phi_second(x, A: float):
    s = x / A
    return -(2.0 * x / A**3) / np.square(1.0 + s * s)


def phi_third(x, A: float):
    s2 = np.square(x / A)
    return -2.0 * (1.0 - 3.0 * s2) / (A**3 * (1.0 + s2) ** 3)


def hilbert_phi_prime(x, A: float):
    return -(1.0 / A**2) * x / (1.0 + np.square(x / A))


def hilbert_phi_second(x, A: float):
    p = phi_prime(x, A)
    return p / A - 2.0 * np.square(p)


def harmonic_phi_prime(x, y, A: float):
    """Harmonic extension of phi' to the upper half plane at height y >= 0."""
    lift = 1.0 + y / A
    return (1.0 / A) * lift / (np.square(x / A) + lift * lift)


def sawtooth(x, A: float):
    """Odd bounded stand-in A*arctan(x/A) for the virial weight x."""
    return A * np.arctan(x / A)


def sawtooth_prime(x, A: float):
    return 1.0 / (1.0 + np.square(x / A))


def lorentzian(x, width: float):
    return width / (width * width + np.square(x))


def lorentzian_conjugate(x, width: float):
    """H applied to the Lorentzian, with the +i sgn(k) symbol."""
    return -x / (width * width + np.square(x))


def kernel_k_phi(x, y, A: float, taylor_fraction: float = KERNEL_TAYLOR_FRACTION):
    """Symmetric kernel K_phi of the bilinear form int (H u_x) u_x phi.

    K(x, y) = [2(phi(x) - phi(y)) - (phi'(x) + phi'(y))(x - y)] / (x - y)^3

    Within |x - y| < taylor_fraction * A the cancellation-free Taylor form is
    used, with phi''' taken at the midpoint for both interior points:

    K = (phi''(y) - phi''(x)) / (2 (x - y)) + phi'''((x + y)/2) / 3

    On the diagonal this reduces to -phi'''(x)/6.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    d = x - y
    near = np.abs(d) < taylor_fraction * A
    safe_d = np.where(near, 1.0, d)

    raw = (
        2.0 * (phi(x, A) - phi(y, A)) - (phi_prime(x, A) + phi_prime(y, A)) * safe_d
    ) / safe_d**3

    mid = 0.5 * (x + y)
    off = np.where(near & (d != 0.0), d, 1.0)
    slope = np.where(
        d != 0.0,
        (phi_second(y, A) - phi_second(x, A)) / (2.0 * off),
        -0.5 * phi_third(x, A),
    )
    taylor = slope + phi_third(mid, A) / 3.0

    result = np.where(near, taylor, raw)
    return result if result.ndim else float(result)

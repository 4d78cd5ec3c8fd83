"""Turning user-facing guarantees into sketch parameters.

The error budget splits as ``epsilon = eps_a + eps_s`` between the counter
algorithm and sampling; the failure budget all goes to sampling
(``delta = 2 * delta_s``) because Space Saving never fails.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

__all__ = ["probit", "psi", "eps_s_of_N", "capacity_for", "Calibration", "derive"]

# Wichura, Algorithm AS 241 (PPND16): rational approximations on three ranges.
_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def probit(q: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"probit needs 0 < q < 1, got {q}")
    d = q - 0.5
    if abs(d) <= 0.425:
        x = 0.180625 - d * d
        return d * _poly(_A, x) / _poly(_B, x)
    tail = q if d < 0 else 1.0 - q
    x = math.sqrt(-math.log(tail))
    if x <= 5.0:
        x -= 1.6
        z = _poly(_C, x) / _poly(_D, x)
    else:
        x -= 5.0
        z = _poly(_E, x) / _poly(_F, x)
    return -z if d < 0 else z


def psi(delta_s: float, eps_s: float, V: int, r: int = 1) -> int:
    """Stream length after which sampling error stays within ``eps_s * N``."""
    if eps_s <= 0:
        return 0
    return math.ceil(probit(1 - delta_s / 2) * V / (eps_s * eps_s) / r)


def eps_s_of_N(delta_s: float, V: int, N: int, r: int = 1) -> float:
    """Sampling error guaranteed after ``N`` packets."""
    if N <= 0:
        raise ValueError("N must be positive")
    return math.sqrt(probit(1 - delta_s / 2) * V / (N * r))


def capacity_for(eps_a: float, eps_s: float = 0.0) -> int:
    """Counters per table, enlarged so an over-sampled table keeps error eps_a."""
    # rounding guard: (1 + 0.001) / 0.001 is 1000.9999999999999 in binary floating point
    return math.ceil(round((1 + eps_s) / eps_a, 9))


@dataclass(frozen=True)
class Calibration:
    epsilon: float
    delta: float
    theta: float
    V: int
    r: int
    eps_a: float
    eps_s: float
    delta_s: float
    capacity: int
    psi: int

    @property
    def delta_a(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def derive(
    epsilon: float,
    delta: float,
    theta: float,
    V: int,
    r: int = 1,
    split_ratio: float = 0.5,
    H: int | None = None,
    deterministic: bool = False,
) -> Calibration:
    """Split the budgets and size the counters.

    ``split_ratio`` is the share of ``epsilon`` given to the counters.  In
    deterministic (update-every-level) mode all of it goes to the counters and
    there is no sampling error.
    """
    if not 0 < epsilon < theta <= 1:
        raise ValueError("need 0 < epsilon < theta <= 1")
    if not 0 < delta < 1:
        raise ValueError("need 0 < delta < 1")
    if H is not None and V < H:
        raise ValueError(f"V={V} must be at least H={H}")
    if not 1 <= r <= V:
        raise ValueError(f"r={r} must lie in [1, V]")
    if deterministic:
        eps_a, eps_s = epsilon, 0.0
    else:
        if not 0 < split_ratio < 1:
            raise ValueError("split_ratio must lie strictly between 0 and 1")
        eps_a = split_ratio * epsilon
        eps_s = epsilon - eps_a
    delta_s = delta / 2
    return Calibration(
        epsilon=epsilon,
        delta=delta,
        theta=theta,
        V=V,
        r=r,
        eps_a=eps_a,
        eps_s=eps_s,
        delta_s=delta_s,
        capacity=capacity_for(eps_a, eps_s),
        psi=psi(delta_s, eps_s, V, r),
    )

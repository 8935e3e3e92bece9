import zlib

import numpy as np
import pytest

from curvlab.core import MultiProfile, ScalarProfile
from curvlab.families import Family1, Family2, Family3


def rng_for(name: str, extra: int = 0) -> np.random.Generator:
    # stable across processes (the builtin string hash is salted per run)
    return np.random.default_rng([zlib.crc32(name.encode()), extra])


def quadratic_multi(p: int) -> MultiProfile:
    """Sum of squares: constant Hessian 2I, flat derivative tower above."""
    terms = [(tuple(2 if j == i else 0 for j in range(p)), 1.0) for i in range(p)]
    return MultiProfile.polynomial(p, terms)


def bumpy_multi(p: int, rng: np.random.Generator, quartic: float = 0.3,
                mixed: float = 0.05) -> MultiProfile:
    """Sum of squares plus small quartic/mixed terms; Hessian stays positive
    definite on the sampling box used in the tests."""
    terms = [(tuple(2 if j == i else 0 for j in range(p)), 1.0) for i in range(p)]
    e4 = [0] * p
    e4[0] = 4
    terms.append((tuple(e4), quartic * float(rng.uniform(0.2, 1.0))))
    if p >= 3:
        terms.append(((1, 1, 1) + (0,) * (p - 3), mixed * float(rng.uniform(-1, 1))))
    return MultiProfile.polynomial(p, terms)


def family1(p: int = 3, kind: str = "bumpy", seed: int = 0) -> Family1:
    if kind == "flat":
        return Family1(p=p, f=MultiProfile.polynomial(p, []))
    if kind == "symmetric":
        return Family1(p=p, f=quadratic_multi(p))
    return Family1(p=p, f=bumpy_multi(p, rng_for("family1", seed)))


def family2(s: int = 2, kind: str = "generic", seed: int = 0) -> Family2:
    if kind == "zero":
        profiles = tuple(ScalarProfile.zero() for _ in range(s))
    elif kind == "symmetric":
        profiles = tuple(ScalarProfile.polynomial([0, 0, 0, 0, -1.0 / 6.0])
                         for _ in range(s))
    elif kind == "quintic":
        profiles = tuple(ScalarProfile.polynomial([0, 0, 0, 0, 0, 1.0])
                         for _ in range(s))
    else:
        rng = rng_for("family2", seed)
        profiles = tuple(
            ScalarProfile.polynomial([0.0, *rng.uniform(-0.3, 0.3, 3)])
            for _ in range(s))
    return Family2(s=s, profiles=profiles)


def family3(r: int = 2, kind: str = "generic", seed: int = 0) -> Family3:
    if kind == "symmetric":
        psi = ScalarProfile.polynomial([0, 0, 1.0])
    elif kind == "exp":
        psi = ScalarProfile.from_callable(lambda u, k: float(np.exp(u)))
    elif kind == "quartic":
        psi = ScalarProfile.polynomial([0, 0, 0, 0, 1.0])
    elif kind == "cubic":
        psi = ScalarProfile.polynomial([0, 0, 0, 1.0])
    else:
        rng = rng_for("family3", seed)
        psi = ScalarProfile.polynomial([0.0, 0.0, 1.0,
                                        *rng.uniform(-0.1, 0.1, 2)])
    return Family3(r=r, psi=psi)


def all_specs(sizes=(2, 3), kind_map=None):
    """One spec per family and size; generic profiles unless overridden."""
    out = []
    for n in sizes:
        out.append(family1(p=n))
        out.append(family2(s=n))
        out.append(family3(r=n))
    return out


def random_points(spec, count, rng, box=1.5):
    return [rng.uniform(-box, box, spec.dim) for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)

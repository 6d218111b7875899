import math

import numpy as np
import pytest

from qattract import _kernels
from qattract.model import ForcingSpectrum, FrequencyVector, Nonlinearity, SystemConfig
from qattract.qpsolve import harmonic_balance_solve


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    _kernels.warm_up()


@pytest.fixture(scope="session")
def freq1():
    return FrequencyVector((1.0,))


@pytest.fixture(scope="session")
def varactor_forcing():
    # f(t) = (5 + 3 sin t)/2 = 2.5 - 0.75i e^{it} + 0.75i e^{-it}
    return ForcingSpectrum.from_modes(1, {(0,): 2.5, (1,): -0.75j, (-1,): 0.75j})


@pytest.fixture(scope="session")
def varactor_cfg(varactor_forcing, freq1):
    return SystemConfig(forcing=varactor_forcing, freq=freq1, g=Nonlinearity.even_monomial(1), gamma=9.0)


@pytest.fixture(scope="session")
def varactor_sol(varactor_cfg):
    return harmonic_balance_solve(varactor_cfg)


@pytest.fixture(scope="session")
def odd_cfg(varactor_forcing, freq1):
    return SystemConfig(forcing=varactor_forcing, freq=freq1, g=Nonlinearity.odd_monomial(1), gamma=10.0)


@pytest.fixture(scope="session")
def odd_sol(odd_cfg):
    return harmonic_balance_solve(odd_cfg)


@pytest.fixture(scope="session")
def const_odd_cfg(freq1):
    forcing = ForcingSpectrum.from_modes(1, {(0,): 2.5})
    return SystemConfig(forcing=forcing, freq=freq1, g=Nonlinearity.odd_monomial(1), gamma=10.0)


@pytest.fixture(scope="session")
def const_odd_sol(const_odd_cfg):
    return harmonic_balance_solve(const_odd_cfg)


@pytest.fixture(scope="session")
def odd_chain(odd_cfg, odd_sol):
    """Full odd-case instrumentation chain at gamma = 10."""
    from qattract import attract
    from qattract.model import equilibrium

    alpha = equilibrium(odd_cfg.g, odd_cfg.forcing.f0)
    rb = attract.stiffness_ratio_bounds(odd_cfg.g, odd_sol, alpha)
    env = attract.friction_envelope(odd_cfg, odd_sol, alpha, rb)
    core = attract.build_core(odd_cfg.g, alpha, env, rb, odd_cfg.gamma)
    return odd_cfg, odd_sol, alpha, rb, env, core


ALPHA_CUBE = 2.5 ** (1.0 / 3.0)
C0_SQRT = math.sqrt(2.5)


def kronecker_times(n, span):
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    j = np.arange(n)
    return span * ((j + 0.5) * golden % 1.0)

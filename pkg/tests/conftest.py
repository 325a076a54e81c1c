import numpy as np
import pytest

import enerkin as ek


@pytest.fixture
def one_type_table():
    return ek.TypeTable(np.array([0.0]))


@pytest.fixture
def one_type_network(one_type_table):
    """Single type, constant unit rate, uniform energy split."""
    return ek.ReactionNetwork(
        one_type_table,
        [ek.BinaryChannel((1, 1), ek.ConstantRate(1.0), ek.UniformKernel([(1, 1, 1.0)]))],
    )


@pytest.fixture
def two_type_canonical_network():
    """Two types, type-preserving channels, canonical kernels from (Gamma(2,1), Exp(1))."""
    tt = ek.TypeTable(np.array([0.0, 0.0]))
    dens = {1: ek.GammaDensity(2.0, 1.0), 2: ek.Exponential(1.0)}

    def ch(pair, outs):
        return ek.BinaryChannel(pair, ek.ConstantRate(1.0), ek.CanonicalKernel(outs, dens))

    return ek.ReactionNetwork(
        tt,
        [ch((1, 1), [(1, 1, 1.0)]), ch((1, 2), [(1, 2, 1.0)]), ch((2, 2), [(2, 2, 1.0)])],
    )


@pytest.fixture
def unary_two_type_network():
    """Two isomers with a unit internal-energy gap and constant conversion rates."""
    tt = ek.TypeTable(np.array([0.0, 1.0]))
    return ek.ReactionNetwork(
        tt,
        unary=[
            ek.UnaryChannel(1, 2, ek.ConstantUnaryRate(1.0)),
            ek.UnaryChannel(2, 1, ek.ConstantUnaryRate(1.0)),
        ],
    )

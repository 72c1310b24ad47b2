"""Shared model zoo for the property tests."""

from ppalab.catalog import interval_normal_cone
from ppalab.operators import (Identity, InverseOf, Linear, PowerGradient, Scaled,
                              SignComponentwise, SubgradAbsSum, Sum, ZeroMap)


def monotone_models():
    """(label, model) for every maximally monotone model with a resolvent."""
    return [
        ("zero", ZeroMap(2)),
        ("identity", Identity(3)),
        ("linear-psd", Linear([[2.0, 1.0], [1.0, 1.0]], [0.5, -1.0])),
        ("linear-skew", Linear([[1.0, -3.0], [3.0, 0.0]])),
        ("sign", SignComponentwise(2)),
        ("abs-subgradient", SubgradAbsSum(3)),
        ("power-3", PowerGradient(3, 2)),
        ("power-5", PowerGradient(5, 1)),
        ("normal-cone", interval_normal_cone()),
        ("scaled-sign", Scaled(2.5, SignComponentwise(1))),
        ("sum-identity-sign", Sum([Identity(1), SignComponentwise(1)])),
        ("sum-power-sign", Sum([PowerGradient(3, 1), SignComponentwise(1)])),
        ("sum-linear", Sum([Linear([[1.0, 0.0], [0.0, 0.0]]), Identity(2)])),
        ("inverse-power", InverseOf(PowerGradient(3, 1))),
        ("inverse-sign", InverseOf(SignComponentwise(1))),
        ("inverse-normal-cone", InverseOf(interval_normal_cone())),
        ("inverse-linear", InverseOf(Linear([[2.0, 0.0], [0.0, 0.5]]))),
    ]

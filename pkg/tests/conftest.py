import numpy as np
import pytest

from softstep.network import HeadConfig, HeadNetwork


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def zero_network(activation, input_dim=4, hidden_width=3):
    """A head whose weights and biases are all exactly zero."""
    config = HeadConfig(
        input_dim=input_dim,
        hidden_width=hidden_width,
        dropout1=0.0,
        dropout2=0.0,
        output_activation=activation,
    )
    return HeadNetwork(
        config=config,
        w1=np.zeros((hidden_width, input_dim)),
        b1=np.zeros(hidden_width),
        w2=np.zeros(hidden_width),
        b2=0.0,
    )

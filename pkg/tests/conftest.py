import numpy as np
import pytest

from nncdf.model import FeedforwardNetwork


def random_net(rng, widths, act="relu", scale=1.0, head="identity"):
    """Dense net with N(0, scale^2 / fan_in) weights; last layer uses ``head``."""
    Ws, bs, acts = [], [], []
    for i in range(len(widths) - 1):
        Ws.append(rng.normal(size=(widths[i + 1], widths[i])) * scale / np.sqrt(widths[i]))
        bs.append(rng.normal(size=widths[i + 1]) * 0.5)
        acts.append(act if i < len(widths) - 2 else head)
    return FeedforwardNetwork.from_arrays(Ws, bs, acts)


def identity_net(n=1):
    return FeedforwardNetwork.from_arrays([np.eye(n)], [np.zeros(n)], ["identity"])


def relu_scalar_net():
    return FeedforwardNetwork.from_arrays([[[1.0]]], [[0.0]], ["relu"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

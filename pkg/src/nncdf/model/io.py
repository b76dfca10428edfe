"""JSON reading and writing for networks and distributions.

Floats are written with ``repr`` (shortest round-trip form), so a
save/load cycle reproduces every array bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

from .distributions import InputDistribution, distribution_from_dict
from .network import DimensionError, FeedforwardNetwork, Layer


class NetworkFormatError(ValueError):
    pass


def network_to_dict(net: FeedforwardNetwork) -> dict:
    return {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.value,
            }
            for layer in net.layers
        ]
    }


def network_from_dict(d) -> FeedforwardNetwork:
    if not isinstance(d, dict) or not isinstance(d.get("layers"), list):
        raise NetworkFormatError("network JSON needs a top-level 'layers' list")
    layers = []
    for i, spec in enumerate(d["layers"]):
        try:
            layers.append(Layer(spec["weights"], spec["bias"], spec.get("activation", "identity")))
        except KeyError as e:
            raise NetworkFormatError(f"layer {i} is missing field {e}") from None
        except DimensionError as e:
            raise DimensionError(f"layer {i}: {e}") from None
        except ValueError as e:
            if "activation" in str(e):
                raise
            raise NetworkFormatError(f"layer {i}: {e}") from None
    return FeedforwardNetwork(layers)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(f"{path}: malformed JSON ({e})") from None


def load_network(path) -> FeedforwardNetwork:
    return network_from_dict(_read_json(path))


def save_network(net: FeedforwardNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net)) + "\n")


def load_distribution(path) -> InputDistribution:
    d = _read_json(path)
    if not isinstance(d, dict):
        raise NetworkFormatError(f"{path}: distribution JSON must be an object")
    return distribution_from_dict(d)


def save_distribution(dist: InputDistribution, path) -> None:
    Path(path).write_text(json.dumps(dist.to_dict()) + "\n")

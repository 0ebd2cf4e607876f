"""Canonical test channels shipped with the package.

FlipBSC: binary symmetric channel whose crossover depends on the state
(0.05 or 0.15, uniform state), averaging to a BSC with crossover 0.1.

Sensor: input 0 observes the state through a 0.9-reliable readout; input 1
pins the output to 1 regardless of the state (communicates, senses nothing).
"""

from importlib import resources

from .channel import StateDMC, load_channel


def fixture_path(name: str):
    """Filesystem path of a shipped fixture spec ('flip_bsc' or 'sensor')."""
    ref = resources.files("idsense") / "data" / f"{name}.json"
    return ref


def flip_bsc() -> StateDMC:
    ch, _ = load_channel(fixture_path("flip_bsc"))
    return ch


def sensor() -> StateDMC:
    ch, _ = load_channel(fixture_path("sensor"))
    return ch

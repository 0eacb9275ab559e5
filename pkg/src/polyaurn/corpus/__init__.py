"""Example urn specifications shipped with the package."""

from importlib import resources
from pathlib import Path

from ..urn_core import UrnSpec, load_spec

NAMES = ("polya", "friedman", "critical", "large", "random_replacement",
         "triangular", "three_colour", "unbalanced")


def path(name: str) -> Path:
    return Path(str(resources.files(__package__) / f"{name}.json"))


def load(name: str) -> UrnSpec:
    return load_spec(path(name))

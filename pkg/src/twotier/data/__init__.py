"""Bundled population fixtures."""

from importlib import resources

from ..population import ConstituencyPartition, read_populations


def eu27_path():
    return resources.files(__name__).joinpath("eu27.txt")


def eu27_populations() -> list[int]:
    """EU27-like member-state populations in thousands (approximate, 2011)."""
    with resources.as_file(eu27_path()) as path:
        return read_populations(path)


def eu27_partition(scale: float = 1.0) -> ConstituencyPartition:
    return ConstituencyPartition.from_populations(eu27_populations(), scale)

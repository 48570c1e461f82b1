"""Bundled synthetic data: a separable 64-example training set, a small
dev split, a 200-sentence raw corpus, and a sample emoji map.

The files are generated, not collected; demos/synthesize_data.py in the
repository rebuilds them from scratch.
"""

from importlib import resources


def asset_path(name: str):
    """Filesystem path of a bundled data file."""
    path = resources.files(__package__).joinpath(name)
    if not path.is_file():
        raise FileNotFoundError(f"no bundled asset named {name!r}")
    return path

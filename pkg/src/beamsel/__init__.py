"""Sub-6GHz driven mmWave base-station and beam selection toolkit.

Submodules are imported explicitly (``from beamsel import scene``) so that
the command-line entry point can configure BLAS threading from the
environment before numpy is first loaded.
"""

__version__ = "0.1.0"

__all__ = [
    "scene",
    "channel",
    "codebook",
    "features",
    "dataset",
    "model",
    "train",
    "evaluation",
    "figures",
    "config",
    "pipeline",
    "cli",
    "errors",
]

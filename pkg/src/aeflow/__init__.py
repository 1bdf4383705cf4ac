"""Limits on anomalous energy flow between correlated quantum subsystems."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("aeflow")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

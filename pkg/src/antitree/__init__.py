"""Anderson models on antitrees: spectra, transfer matrices, SDE limits and
level statistics."""

__version__ = "0.1.0"

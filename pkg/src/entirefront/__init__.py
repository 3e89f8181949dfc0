"""Entire solutions of monostable reaction-diffusion systems, built from traveling fronts
and the spatially independent solution, with runtime checks of the structural hypotheses."""

__version__ = "0.1.0"

from .errors import ArtifactError, AssumptionError, ConfigError, NumericalError  # noqa: E402
from .model import ModelSpec, make_model  # noqa: E402
from .spectral import SpectralData, compute_cstar  # noqa: E402

__all__ = ["ArtifactError", "AssumptionError", "ConfigError", "NumericalError", "ModelSpec",
           "SpectralData", "compute_cstar", "make_model", "__version__"]

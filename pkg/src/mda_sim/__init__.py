"""Robot-relay mobility diversity simulation for clustered sensor networks."""

__version__ = "0.1.0"

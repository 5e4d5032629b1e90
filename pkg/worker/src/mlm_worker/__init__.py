"""Masked-LM worker: stdio JSON-lines service around a pre-trained encoder."""

from .service import ServiceError, WorkerService

__version__ = "0.1.0"

__all__ = ["ServiceError", "WorkerService", "__version__"]

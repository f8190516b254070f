class ExtractorError(Exception):
    """Base class for extraction failures."""


class ParameterError(ExtractorError):
    """Invalid argument (unknown model, empty audio, bad path)."""


class ModelUnavailableError(ExtractorError):
    """Model weights (or their runtime) could not be loaded locally.

    The message carries a download hint; fetching weights is an
    explicit user action, never an implicit side effect.
    """

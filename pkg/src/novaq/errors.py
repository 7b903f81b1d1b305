class ConfigurationError(ValueError):
    """Invalid experiment configuration or out-of-range setup parameter."""


class InputArtifactError(RuntimeError):
    """A required input file (suite, manifest) is missing or malformed."""

"""Exception classes shared across the pipeline.

The CLI maps these onto its exit-code contract: schema problems exit 2,
missing upstream artifacts exit 3 (4 for the report stage), everything
else exits 1.
"""


class TrajParetoError(Exception):
    """Base class for pipeline errors."""


class SchemaError(TrajParetoError):
    """Input table is missing a mandatory column or has an unusable layout."""


class GridError(TrajParetoError):
    """An agent's timestamps do not form a uniform grid."""


class ConfigError(TrajParetoError):
    """A configuration value violates its documented constraints."""


class FitError(TrajParetoError):
    """A model fit received degenerate or insufficient data."""


class DomainError(TrajParetoError):
    """An operation was evaluated outside its mathematical domain."""


class MissingUpstreamError(TrajParetoError):
    """A stage requires an artifact that an earlier stage has not produced."""

    def __init__(self, stage: str, path: str):
        self.stage = stage
        self.path = path
        super().__init__(f"stage '{stage}' requires missing artifact: {path}")

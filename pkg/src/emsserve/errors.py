"""Exception types shared across the package."""


class EmsServeError(Exception):
    """Base class for all package-specific errors."""


class MalformedSpec(EmsServeError, ValueError):
    """A model spec violates its structural invariants."""


class MissingModality(EmsServeError, ValueError):
    """A feature map does not cover exactly the model's modalities."""


class DimMismatch(EmsServeError, ValueError):
    """A feature vector's length disagrees with its encoder spec."""


class InvalidArgs(EmsServeError, ValueError):
    """Bad arguments to a measurement or configuration call."""


class SchemaError(EmsServeError, ValueError):
    """A persisted file failed schema validation; message names the offending key."""


class ProfileMiss(EmsServeError, KeyError):
    """No latency recorded for a (module, device) pair.

    Deliberately a distinct signal rather than 0 or infinity so callers can
    apply an explicit policy (e.g. treat the placement as infeasible).
    """


class VersionRegression(EmsServeError, ValueError):
    """Attempt to overwrite a cache entry with an older step version."""


class BeforeTraceStart(EmsServeError, ValueError):
    """Bandwidth queried before the first trace sample."""


class NoProbeYet(EmsServeError, ValueError):
    """Heartbeat estimate requested for a negative timestamp."""


class UnservableModule(EmsServeError, ValueError):
    """The device profile has no local latency for a required module."""


class UnknownEpisode(EmsServeError, ValueError):
    """Episode number outside the bundled catalog."""


class ConfigError(EmsServeError, ValueError):
    """Incomplete or inconsistent run configuration."""


class MismatchedRuns(EmsServeError, ValueError):
    """Reports being compared come from different episodes or configs."""


class ZeroConcentration(EmsServeError, ValueError):
    """Dose computation with a non-positive concentration."""


class NegativeQuantity(EmsServeError, ValueError):
    """Dose computation with a negative quantity."""


class UnknownEntry(EmsServeError, KeyError):
    """Medicine entry not present in the dictionary."""

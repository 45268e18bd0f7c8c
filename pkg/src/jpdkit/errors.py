"""Exception types shared across the toolkit."""


class JpdError(Exception):
    """Base class for all toolkit errors."""


class FluxDomainError(JpdError, ValueError):
    """A flux-dependent formula was evaluated outside its validity domain.

    Carries the offending external flux (``phi_ext``, in the units the
    failing formula uses) for diagnostics.
    """

    def __init__(self, message, phi_ext):
        super().__init__(f"{message} (phi_ext={phi_ext!r})")
        self.phi_ext = phi_ext


class ThresholdError(JpdError, ValueError):
    """Parametric pump strength at or beyond the oscillation threshold 2*chi = kappa."""


class SpanError(JpdError, ValueError):
    """Frequency span of a trace is too small for the requested operation."""


class TraceFormatError(JpdError, ValueError):
    """Malformed trace/series file. Carries row/column diagnostics when known."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class FitError(JpdError, RuntimeError):
    """Numerical optimization failed in a way that cannot be reported as a result."""


class PipelineStageError(JpdError, RuntimeError):
    """A stage of the reflection-fit pipeline failed.

    Wraps the underlying exception and names the stage so batch users can
    tell where a trace was rejected.
    """

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

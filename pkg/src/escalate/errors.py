"""Exception types shared across the package."""


class EscalateError(Exception):
    """Base class for all package-specific errors."""


class ModelFormatError(EscalateError):
    """A model document is malformed: bad syntax, unknown or missing fields,
    duplicate ids, or dangling references.

    ``position`` carries (line, column) for syntax errors when known.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class InvalidModelError(EscalateError):
    """A ModelSpec with error-severity validation findings was passed to an
    operation that requires a valid model."""

    def __init__(self, report):
        errors = [f for f in report.findings if f.severity == "error"]
        codes = ", ".join(sorted({f.code for f in errors}))
        super().__init__(f"model has {len(errors)} validation error(s): {codes}")
        self.report = report


class NoRootError(EscalateError):
    """The task-table normalisation exponent has no root in the search
    bracket: the elicited inputs are inconsistent (total configuration mass
    cannot reach one)."""

    def __init__(self, state, mass_lo, mass_hi):
        super().__init__(
            f"no normalisation exponent for state {state!r}: configuration mass "
            f"spans [{min(mass_lo, mass_hi):.6f}, {max(mass_lo, mass_hi):.6f}] "
            f"over the whole bracket and never equals 1"
        )
        self.state = state
        self.mass_lo = mass_lo
        self.mass_hi = mass_hi


class FlatEvidenceError(EscalateError):
    """Every state's marginal likelihood underflowed to zero; the update
    carries no usable information."""

    def __init__(self):
        super().__init__("all state likelihoods underflowed to zero")


class ContradictoryEvidenceError(EscalateError):
    """Clamped task evidence assigns zero mass to every state."""

    def __init__(self):
        super().__init__("evidence has zero probability under every state")

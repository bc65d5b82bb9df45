"""Exception types shared across the package."""


class ZenoError(Exception):
    """Base class for all package errors."""


class DimensionCapError(ZenoError):
    """Requested Hilbert-space sector exceeds the configured dimension cap."""

    def __init__(self, required, cap):
        self.required = required
        self.cap = cap
        super().__init__(
            f"sector dimension {required} exceeds cap {cap}; "
            f"raise the cap explicitly if this size is intended"
        )


class IntegrationError(ZenoError):
    """Time integration failed a stability or conservation check."""


class ValidationError(ZenoError):
    """A configuration field failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnsupportedLatticeError(ZenoError):
    """Operation requires a lattice feature the configuration lacks."""


class DegenerateSpecError(ZenoError):
    """State construction collapsed to zero or has no free amplitude."""


class SingularEliminationError(ZenoError):
    """Adiabatic elimination hit a vanishing denominator."""

    def __init__(self, pair):
        self.pair = pair
        super().__init__(
            f"vanishing dissipative denominator for subspace pair {pair}; "
            f"the measurement eigenvalues coincide"
        )

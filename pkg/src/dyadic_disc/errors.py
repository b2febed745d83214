class GuardError(RuntimeError):
    """An enumeration would exceed a feasibility limit."""


class CertificationError(ValueError):
    """A point set failed a property the requested check depends on."""

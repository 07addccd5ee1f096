"""Exception types raised across the package.

Every error derives from :class:`AdaconcError`, itself a ``ValueError``, so the
CLI can map all of them to the "validation error" exit code in one place.
"""


class AdaconcError(ValueError):
    pass


class InvalidRectangle(AdaconcError):
    pass


class InvalidDataset(AdaconcError):
    pass


class InvalidParams(AdaconcError):
    pass


class SplitOutsideRegion(AdaconcError):
    pass


class AlreadySplit(AdaconcError):
    pass


class InvalidPartition(AdaconcError):
    """Raised when fitting on a partition that fails validation.

    The failing :class:`~adaconc.partition.ValidityVerdict` is kept on
    ``verdict``.
    """

    def __init__(self, verdict):
        self.verdict = verdict
        lines = "; ".join(str(v) for v in verdict.violations[:5])
        super().__init__(f"partition is not valid: {lines}")


class PartitionMismatch(AdaconcError):
    pass


class OracleUnavailable(AdaconcError):
    pass


class CounterOutOfRange(AdaconcError):
    pass


class EnumerationTooLarge(AdaconcError):
    pass


class VolumeTooSmall(AdaconcError):
    pass


class SupportMismatch(AdaconcError):
    pass


class NoApproximant(AdaconcError):
    """No member of the approximating family satisfies the containment rule."""


class EmptySide(AdaconcError):
    pass


class DatasetTooSmall(AdaconcError):
    pass


class SpecInvalid(AdaconcError):
    pass


class DegenerateScale(AdaconcError):
    pass

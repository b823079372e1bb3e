class OctermError(Exception):
    """Base class for solver failures that are not model-validation errors."""


class EnumerationCapExceeded(OctermError):
    def __init__(self, what: str, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"enumeration cap exceeded: {what} has {count} candidates (cap {cap})")


class NotRising(OctermError):
    """The tail-bound LP has no solution with x > 0."""


class TableTooLarge(OctermError):
    pass


class SegmentTooLarge(OctermError):
    """The segment game for the certified N exceeds the configured state cap."""


DEFAULT_ENUM_CAP = 2**20
# exact solving of the segment game gets slow beyond this many states: its
# values carry denominators that grow linearly in bits with the counter
DEFAULT_SEGMENT_CAP = 2**15

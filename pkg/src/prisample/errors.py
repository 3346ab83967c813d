"""Exception hierarchy shared by all modules."""


class SamplingError(Exception):
    """Base class for every error raised by this package."""


class MissingFeature(SamplingError, KeyError):
    def __init__(self, name, record_id=None):
        self.name = name
        self.record_id = record_id
        where = f" on record {record_id!r}" if record_id is not None else ""
        super().__init__(f"feature {name!r} missing{where}")

    def __str__(self):
        return self.args[0]


class ZeroDenominator(SamplingError, ZeroDivisionError):
    pass


class InvalidRecord(SamplingError, ValueError):
    pass


class DuplicateId(SamplingError, ValueError):
    def __init__(self, record_id):
        self.record_id = record_id
        super().__init__(f"duplicate id {record_id!r}")


class ParseError(SamplingError, ValueError):
    pass


class EmptyMaster(SamplingError, ValueError):
    pass


class MasterMismatch(SamplingError, ValueError):
    pass


class AlreadyExhausted(SamplingError, ValueError):
    pass


class CorruptMaster(SamplingError, ValueError):
    pass


class EmptySample(SamplingError, ValueError):
    pass


class MalformedCurve(SamplingError, ValueError):
    pass


class NotPositiveSemidefinite(SamplingError, ValueError):
    pass


class InsufficientNodes(SamplingError, ValueError):
    pass


class ModeMismatch(SamplingError, ValueError):
    pass

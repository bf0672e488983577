"""Exception types shared across the package."""


class PflabError(Exception):
    pass


class ContractViolation(PflabError, ValueError):
    """An operation was called outside its precondition (wrong family, bad sign)."""


class DomainViolation(PflabError, ValueError):
    """A logarithm or root argument left its admissible region."""

    def __init__(self, msg, where=None):
        super().__init__(msg)
        self.where = where


class HypothesisViolation(PflabError):
    """A hypothesis of an identity (norm bound, invertibility) failed."""


class SingularOperatorError(PflabError, ArithmeticError):
    """I - A is exactly singular at working precision."""


class SeriesTruncationError(PflabError):
    def __init__(self, msg, tail):
        super().__init__(msg)
        self.tail = tail


class PfaffianBranchError(PflabError):
    """Sign-by-homotopy could not resolve a zero crossing."""


class ConfigError(PflabError, ValueError):
    def __init__(self, msg, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{', '.join(loc)}: {msg}" if loc else msg)
        self.line = line
        self.field = field

"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures
onto its documented codes without a lookup table.
"""


class TsaError(Exception):
    exit_code = 1


class ConfigError(TsaError, ValueError):
    exit_code = 2


class InputError(TsaError, ValueError):
    """Input document or table does not match its schema."""

    exit_code = 3


class CaseSyntaxError(InputError):
    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.field = field


class RefError(InputError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InvariantError(InputError):
    pass


class LengthMismatch(InputError):
    pass


class NumericalError(TsaError, ArithmeticError):
    exit_code = 4


class Diverged(NumericalError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class SingularJacobian(NumericalError):
    pass


class SingularBlock(NumericalError):
    pass


class StepError(NumericalError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NonFinite(NumericalError):
    pass


class NotConverged(NumericalError):
    pass


class Infeasible(TsaError):
    exit_code = 5

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingleClass(TsaError, ValueError):
    exit_code = 4


class FormatVersionMismatch(InputError):
    pass


class CorruptFile(InputError):
    pass

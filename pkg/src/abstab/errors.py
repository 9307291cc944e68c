"""Exception hierarchy. Each error carries the CLI exit code it maps to."""


class AbstabError(Exception):
    exit_code = 1


class ConfigError(AbstabError, ValueError):
    exit_code = 2


class DomainError(AbstabError, ValueError):
    exit_code = 2


class NotOscillatory(AbstabError):
    exit_code = 3


class DivisionByZeroAngularRate(AbstabError, ZeroDivisionError):
    exit_code = 3


class CflUnsatisfiable(AbstabError):
    exit_code = 4


class NonFiniteValue(AbstabError, FloatingPointError):
    exit_code = 4


class OracleViolation(AbstabError):
    exit_code = 5

    def __init__(self, message, policy=None, report=None):
        super().__init__(message)
        self.policy = policy
        self.report = report


class BracketError(AbstabError):
    exit_code = 6

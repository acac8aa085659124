"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class GenmeterError(Exception):
    exit_code = 1


class ConfigError(GenmeterError, ValueError):
    """Invalid configuration, shape mismatch between components."""
    exit_code = 2


class InputError(GenmeterError, ValueError):
    """Invalid data passed to an operation (empty sets, bad ranges)."""
    exit_code = 2


class TrainingDiverged(GenmeterError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DataFormatError(GenmeterError, OSError):
    """Malformed dataset or checkpoint file."""
    exit_code = 4

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

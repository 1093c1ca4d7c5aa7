"""
Errors raised by the pipeline. Every error knows the exit code that run.py
reports for it: 1 for usage, configuration and input problems, 2 for domain
violations (divergence, unobservable configurations, numeric failures).
"""


class DFTCError(Exception):
    exit_code = 1


class ConfigError(DFTCError):
    pass


class InvalidParamsError(ConfigError):
    pass


class MissingInputError(DFTCError):
    pass


class ParseError(DFTCError):
    pass


class InvalidInputError(DFTCError):
    pass


class DivergenceError(DFTCError):
    exit_code = 2

    def __init__(self, message, state=None):
        super(DivergenceError, self).__init__(message)
        self.state = state


class UnobservableError(DFTCError):
    exit_code = 2


class NonConvergenceError(DFTCError):
    exit_code = 2

    def __init__(self, message, residual=None):
        super(NonConvergenceError, self).__init__(message)
        self.residual = residual


class InstabilityError(DFTCError):
    exit_code = 2


class NumericError(DFTCError):
    exit_code = 2


class TrainingDivergedError(NumericError):

    def __init__(self, message, epoch=None, batch=None):
        super(TrainingDivergedError, self).__init__(message)
        self.epoch = epoch
        self.batch = batch

class GibbsumError(Exception):
    """ Root of every error raised by gibbs_helper.
    """


class ValidationError(GibbsumError, ValueError):
    """ Bad input. `field` is the dotted path of the offending value when
        the input came from a config document.
    """

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class EnumerationInfeasible(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class ContractViolation(ValidationError):
    pass


class PipelineError(GibbsumError, RuntimeError):
    """ A run started but could not produce a result.
    """


class DegenerateError(PipelineError):
    pass


class ScheduleError(PipelineError):
    def __init__(self, message, move_log=None):
        super().__init__(message)
        self.move_log = list(move_log or [])


class JumpError(PipelineError):
    pass


class StageError(PipelineError):
    def __init__(self, message, stage):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage

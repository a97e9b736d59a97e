"""Exception hierarchy."""


class OpenMABError(Exception):
    pass


class InvalidParameterError(OpenMABError, ValueError):
    pass


class MalformedTraceError(OpenMABError, ValueError):
    pass


class ModelMismatchError(OpenMABError, ValueError):
    pass


class InvalidModelError(OpenMABError, ValueError):
    pass


class EmptyPopulationError(OpenMABError):
    pass


class InvalidWeightsError(OpenMABError, ValueError):
    pass


class UndefinedEstimateError(OpenMABError):
    pass


class InternalInvariantError(OpenMABError, AssertionError):
    pass


class LemmaViolation(OpenMABError, AssertionError):
    """A runtime lemma check fired. Carries the round and offending values."""

    def __init__(self, name, t, detail):
        self.name = name
        self.t = t
        self.detail = detail
        super().__init__(f"{name} violated at round {t}: {detail}")


class ConfigError(OpenMABError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")

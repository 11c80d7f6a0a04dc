class MixregError(RuntimeError):
    status = 1

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.message = msg
        self.index = index


class ArgumentError(MixregError, ValueError):
    status = 2


class IntegrationError(MixregError):
    status = 3


class DataError(MixregError):
    status = 4

    def __init__(self, msg, row=None, column=None):
        super().__init__(msg, row)
        self.row = row
        self.column = column


class CrossValidationError(MixregError):
    status = 5

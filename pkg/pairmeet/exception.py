class PairMeetError(Exception):

    def __init__(self, message=None):
        self._message = message
        super().__init__(self._message)

    @property
    def message(self):
        return self._message


class InvalidParameterError(PairMeetError, ValueError):

    def __init__(self, name, value, message=None):
        self._name = name
        self._value = value
        super().__init__(message)

    @property
    def name(self):
        return self._name

    @property
    def value(self):
        return self._value


class DimensionError(PairMeetError, ValueError):

    def __init__(self, expected, actual, message=None):
        self._expected = expected
        self._actual = actual
        super().__init__(message)

    @property
    def expected(self):
        return self._expected

    @property
    def actual(self):
        return self._actual


class PairIndexError(PairMeetError, IndexError):

    def __init__(self, index, n, message=None):
        self._index = index
        self._n = n
        super().__init__(message)

    @property
    def index(self):
        return self._index

    @property
    def n(self):
        return self._n


class GraphFormatError(PairMeetError, ValueError):

    def __init__(self, line_no, message=None):
        self._line_no = line_no
        super().__init__(message)

    @property
    def line_no(self):
        return self._line_no


class DegenerateGraphError(PairMeetError, ValueError):

    def __init__(self, vertex, message=None):
        self._vertex = vertex
        super().__init__(message)

    @property
    def vertex(self):
        return self._vertex


class NoUniqueStationaryError(PairMeetError, ValueError):
    pass


class DenseSizeError(PairMeetError, ValueError):

    def __init__(self, n, threshold, message=None):
        self._n = n
        self._threshold = threshold
        super().__init__(message)

    @property
    def n(self):
        return self._n

    @property
    def threshold(self):
        return self._threshold


class InfiniteMeetingTimeError(PairMeetError, ArithmeticError):
    """Raised when L_kill is singular or numerically near-singular."""

    def __init__(self, period=None, rcond=None, message=None):
        self._period = period
        self._rcond = rcond
        super().__init__(message)

    @property
    def period(self):
        """Period of the chain, or None when it could not be determined."""
        return self._period

    @property
    def rcond(self):
        return self._rcond


class ConvergenceError(PairMeetError, RuntimeError):

    def __init__(self, residual=None, iterations=None, message=None):
        self._residual = residual
        self._iterations = iterations
        super().__init__(message)

    @property
    def residual(self):
        return self._residual

    @property
    def iterations(self):
        return self._iterations


class InsufficientDataError(PairMeetError, ValueError):
    pass


class InconsistencyError(PairMeetError, RuntimeError):

    def __init__(self, mismatch, message=None):
        self._mismatch = mismatch
        super().__init__(message)

    @property
    def mismatch(self):
        return self._mismatch


class RecoveryError(PairMeetError, RuntimeError):

    def __init__(self, angle, message=None):
        self._angle = angle
        super().__init__(message)

    @property
    def angle(self):
        """Angle in degrees between perturbed and unperturbed vectors."""
        return self._angle

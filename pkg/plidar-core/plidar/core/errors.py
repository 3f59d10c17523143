""" Exceptions raised by plidar.core operations """


class PlidarError(Exception):
    pass


class EmptyInputError(PlidarError, ValueError):
    """A map, image or cloud with nothing in it"""


class ShapeMismatchError(PlidarError, ValueError):
    """Two inputs that must share dimensions do not"""


class GridKindError(PlidarError, ValueError):
    """A cost volume of the wrong grid kind"""


class DegenerateGeometryError(PlidarError, ValueError):
    """A point for which the requested geometric quantity is undefined"""


class NoValidPixelsError(PlidarError, ValueError):
    """No pixel is valid in every input of a reduction"""


class CalibrationFormatError(PlidarError, ValueError):
    """A calibration file is missing a key or has a malformed entry"""

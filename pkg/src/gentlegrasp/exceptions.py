"""Exception types raised across the package."""


class GentleGraspError(Exception):
    pass


class DegenerateGradient(GentleGraspError, ValueError):
    """Surface gradient vanishes at the sample point, so no normal exists."""


class EmptyPatch(GentleGraspError, ValueError):
    pass


class NoContact(GentleGraspError, ValueError):
    """Normal resultant too small for the contact coefficient to be defined."""


class InvalidConfig(GentleGraspError, ValueError):
    pass


class GripperLimitReached(GentleGraspError):
    """Gripper hit its closing limit without ever detecting contact."""

    def __init__(self, x_g, x_max):
        super().__init__(f"gripper at {x_g:.3f} mm would exceed limit {x_max:.3f} mm without contact")
        self.x_g = x_g
        self.x_max = x_max


class ObjectDropped(GentleGraspError):
    """Cumulative macro slip passed the drop threshold."""

    def __init__(self, state, threshold):
        super().__init__(f"macro slip {state.slip_displacement:.3f} mm exceeded {threshold:.3f} mm")
        self.state = state
        self.threshold = threshold


class ParseError(GentleGraspError, ValueError):
    """Malformed input file. ``field`` and ``line`` locate the problem when known."""

    def __init__(self, message, field=None, line=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ": ".join([", ".join(where)]) + ": " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
        self.path = path


class ValidationError(GentleGraspError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(f"field '{field}': {message}" if field else message)
        self.field = field


class EmptyLog(GentleGraspError, ValueError):
    pass

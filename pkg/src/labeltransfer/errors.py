"""Exception types shared across the package."""


class LabelTransferError(Exception):
    """Base class for all errors raised by this package."""


class PointBehindCamera(LabelTransferError):
    """Projection requested for a point at or behind the camera plane."""


class PoleSingularity(LabelTransferError):
    """Mercator projection evaluated too close to a pole."""


class EmptyNeighborhood(LabelTransferError):
    """No cloud points found within the search radius."""


class MissingPose(LabelTransferError):
    """A dynamic primitive has no resolvable pose at the requested timestamp."""


class MissingNormals(LabelTransferError):
    """Operation requires per-point normals that are not present."""


class DuplicateTimestamp(LabelTransferError):
    """Keyframe timestamps must be strictly increasing."""


class NoPointsInPrimitive(LabelTransferError):
    """No keyframe contributed any point enclosed by the primitive."""


class EmptyScan(LabelTransferError):
    """No scan points near the predicted object location."""


class NoPrimitives(LabelTransferError):
    """Constraint construction requires at least one primitive."""


class NonFiniteUnary(LabelTransferError):
    """A unary energy is NaN or infinite."""


class NonFiniteGradient(LabelTransferError):
    """A gradient passed to the optimizer is NaN or infinite."""


class ShapeMismatch(LabelTransferError):
    """Input arrays do not share the required shape."""


class DegenerateConfiguration(LabelTransferError):
    """Point correspondences are insufficient for alignment."""


class LengthMismatch(LabelTransferError):
    """Trajectories are not associated one-to-one."""


class EmptyPrediction(LabelTransferError):
    """Prediction set is empty where points are required."""


class FileFormatError(LabelTransferError):
    """A file does not conform to the expected on-disk format."""

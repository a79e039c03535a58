"""Exception types shared across the package."""


class GencylError(Exception):
    """Base class for every package-specific error."""


class DegenerateSkeleton(GencylError):
    """Skeleton has fewer than two vertices or contains a zero-length segment."""


class EmptyCloud(GencylError):
    """Operation requires a non-empty point cloud."""


class IndexOutOfRange(GencylError):
    """A vertex index does not refer to an existing skeleton vertex."""


class NonOrthonormalRotation(GencylError):
    """Rotation matrix is not orthonormal with determinant +1."""


class TooFewPoints(GencylError):
    """Cloud has fewer points than the requested number of skeleton samples."""


class NoLeaves(GencylError):
    """Graph has no degree-1 vertex to anchor a path (e.g. a pure cycle)."""


class BadWindow(GencylError):
    """Fragment window length must be positive."""


class EmptyFragment(GencylError):
    """Fragment contains no points, so no batch can be formed."""


class MissingVotes(GencylError):
    """A point queried for its majority label has no recorded votes."""


class UncoveredPoint(GencylError):
    """A cloud point appears in no batch."""


class OutOfGrid(GencylError):
    """A point falls outside the volume grid bounds."""


class CyclicParentage(GencylError):
    """SWC parent links form a cycle, or a graph with cycles was given to save_swc."""


class MixedArity(GencylError):
    """Point-cloud file mixes labeled and unlabeled rows."""


class ShapeMismatch(GencylError):
    """Volume payload length does not match the declared shape."""


class NonPolygonalFace(GencylError):
    """OBJ face references fewer than three vertices."""


class LengthMismatch(GencylError):
    """Prediction and ground-truth label sequences differ in length."""


class BadSpec(GencylError):
    """Synthetic tube specification is invalid."""


class ParseError(GencylError):
    """Malformed input file; carries the path and 1-based line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)

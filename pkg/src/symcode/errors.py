"""Exception types shared across the toolkit."""


class SymcodeError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SymcodeError):
    """A mesh or data file could not be parsed."""


class UnsupportedFeature(SymcodeError):
    """A file uses a feature the loader does not handle (e.g. n-gons, n > 4)."""


class DegenerateMesh(SymcodeError):
    """Mesh too small/degenerate for the requested query."""


class UnknownPart(SymcodeError):
    """Requested part id does not exist in the mesh labels."""


class InvalidOrder(SymcodeError):
    """Symmetry order / discretization count below 2."""


class OrbitMismatch(SymcodeError):
    """A transformed vertex has no mesh vertex within tolerance.

    Signals an inconsistency between the symmetry annotation and the
    classification threshold. Carries the offending vertex index.
    """

    def __init__(self, vertex_index: int, motion_index: int, distance: float):
        self.vertex_index = int(vertex_index)
        self.motion_index = int(motion_index)
        self.distance = float(distance)
        super().__init__(
            f"vertex {vertex_index}: motion {motion_index} maps it "
            f"{distance:.6g} away from the closest mesh vertex"
        )


class TooFewPoints(SymcodeError):
    """Operation needs more points than were supplied."""


class InvalidBits(SymcodeError):
    """Code width d outside the supported [1, 30] range."""


class UnassignedCode(SymcodeError):
    """Code value inside [0, 2^d) but never assigned to a group."""


class BitOutOfRange(SymcodeError):
    """Bit index >= code width d."""


class BehindCamera(SymcodeError):
    """Point has non-positive camera-frame depth."""


class DegenerateConfiguration(SymcodeError):
    """Point configuration unsuitable for the solver (e.g. collinear)."""


class NoConsensus(SymcodeError):
    """RANSAC failed to find a hypothesis with enough inliers."""


class DegenerateInput(SymcodeError):
    """Numerically degenerate input (zero/parallel vectors)."""


class NonPositiveDepth(SymcodeError):
    """Decoded or provided depth is not strictly positive."""


class ShapeMismatch(SymcodeError):
    """Arrays that must share a resolution do not."""


class ConfigMismatch(SymcodeError):
    """Evaluation inputs are inconsistent (e.g. missing diameters)."""

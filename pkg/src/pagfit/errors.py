"""Exception types shared across the package.

Every error raised by library code derives from :class:`PagfitError` so the
CLI can map failures to machine-readable JSON without catching bare
``Exception``.
"""


class PagfitError(Exception):
    """Base class for all package errors."""


class SchemaError(PagfitError):
    """A document is syntactically valid but violates the expected schema
    (missing field, wrong type, unknown enum value)."""


class GraphReferenceError(SchemaError):
    """An identifier in a part affordance graph does not resolve."""


class BindingError(PagfitError):
    """A graph node has no bound geometry in the scene."""


class EmptyCloudError(PagfitError):
    """An operation received an empty point cloud."""


class NoViewsError(PagfitError):
    """Label voting was called without any views."""


class NonPositiveDepthError(PagfitError):
    """A point lies at or behind the camera plane during projection."""


class AntipodalRotationsError(PagfitError):
    """Slerp midpoint requested for rotations a half-turn apart."""


class DegenerateMeshError(PagfitError):
    """Mesh has no usable triangles."""


class FrameCountMismatchError(PagfitError):
    """Inputs disagree on the number of frames."""


class TooFewFramesError(PagfitError):
    """A temporal term needs more frames than were provided."""


class TooFewSamplesError(PagfitError):
    """A sample-set metric needs at least two samples."""


class InfeasibleSpecError(PagfitError):
    """A synthetic scenario cannot satisfy its own constraints."""


class NonFiniteLossError(PagfitError):
    """Optimization produced NaN/inf in every restart."""


class SceneValidationError(PagfitError):
    """Scene inputs are inconsistent (frame counts, missing parts, ...)."""


class FormatError(PagfitError):
    """A data file (PLY, OBJ, SDF grid, manifest) could not be parsed."""

"""Exception hierarchy shared by all pipeline stages."""


class FsgraphError(Exception):
    """Base class for all errors raised by this package."""


# --- scene loading / camera math ---

class MissingAsset(FsgraphError):
    """A frame lacks one of its required files (color/depth/pose/intrinsics)."""


class MalformedPose(FsgraphError):
    """Pose rotation is not orthonormal (or not a proper rotation) within tolerance."""


class DimensionMismatch(FsgraphError):
    """Color and depth resolutions disagree and cannot be reconciled."""


class ZeroDepth(FsgraphError):
    """Unprojection requested at a pixel with no valid depth."""


class OutOfBounds(FsgraphError):
    """Pixel coordinate outside the image."""


class BehindCamera(FsgraphError):
    """Projected point has camera-space z <= 0."""


# --- model / detector backends ---

class BackendUnreachable(FsgraphError):
    """Backend did not answer after the retry budget was exhausted."""


class RateLimited(BackendUnreachable):
    """Backend kept answering 429 past the retry budget."""


class ReplayMiss(FsgraphError):
    """Replay backend has no fixture for the request digest."""


class FixtureMiss(FsgraphError):
    """Detector fixture file not found for (frame, prompt)."""


class UnparsableModelOutput(FsgraphError):
    """Model reply failed the expected structured format after the reformat retry."""


# --- fusion / geometry ---

class EmptyLift(FsgraphError):
    """No masked pixel of the detection has valid depth."""


class EmptySet(FsgraphError):
    """Operation requires a nonempty point set."""


class InvalidBox(FsgraphError):
    """3D box has min > max on some axis."""


# --- graph / eval ---

class DanglingEdge(FsgraphError):
    """Edge references a node id that does not exist in the graph."""


class SchemaViolation(FsgraphError):
    """Serialized graph document does not match the expected schema."""


class EmptyGroundTruth(FsgraphError):
    """Evaluation requested against a ground truth with no nodes."""


# --- pipeline ---

class MissingCheckpoint(FsgraphError):
    """A stage was requested before its upstream stage has run."""

    def __init__(self, stage: str):
        super().__init__(f"missing checkpoint for stage '{stage}'")
        self.stage = stage


class ConfigError(FsgraphError):
    """Pipeline configuration is invalid or references missing paths."""

class MalafideError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(MalafideError, ValueError):
    """An input violates a precondition (length, sample rate, emptiness, finiteness)."""


class WavFormatError(ValidationError):
    """A WAV file is not RIFF/WAVE, 16-bit PCM, mono."""


class ConfigError(ValidationError):
    """A run configuration is malformed or names an unknown key."""


class NumericalError(MalafideError, RuntimeError):
    """A gradient or objective became non-finite during optimisation."""


class UndertrainedError(MalafideError, RuntimeError):
    """A countermeasure failed to reach its held-out EER threshold.

    Args:
        achieved_eer (float): Held-out EER of the final model.
        threshold (float): EER the model had to stay below.
    """

    def __init__(self, achieved_eer: float, threshold: float):
        self.achieved_eer = achieved_eer
        self.threshold = threshold
        super().__init__(
            f"CM undertrained: held-out EER {achieved_eer:.4f} "
            f"did not fall below {threshold:.4f}"
        )


class DegenerateScoresWarning(UserWarning):
    """A scoring system produced a constant score over the whole trial set."""

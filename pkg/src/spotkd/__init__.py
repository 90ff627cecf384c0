"""Few-shot precise event spotting with multimodal teacher-student distillation.

The package trains a small temporal detector on synthetic multimodal clips
(pose, RGB-like and flow-like feature streams) under a k-clip labeled budget,
and implements two transfer strategies on top of it: representation-level
distillation with an annealed pseudo-label schedule, and prediction-level
distillation with an adaptive reliability weight.
"""

from spotkd.schema import EventSequence, LabelSchema, event_vocab, tennis_schema, validate_hard_vector

__version__ = "0.1.0"

__all__ = [
    "EventSequence",
    "LabelSchema",
    "event_vocab",
    "tennis_schema",
    "validate_hard_vector",
    "__version__",
]

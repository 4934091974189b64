from .algebra import Runner, RunnerDict, handle
from .harness import ReconstructionTracer, ActivationStats, ActivationRecorder

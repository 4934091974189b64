from .algebra import ValueSyntax, EffectSignature, EffectSignatureDict
from .hooks import (
  PipelineHooks, StepHooks, FeatureHooks, ObservationHooks)

PipelineHooks.export_ops(globals())

from .losses import (
  EPS, LOSS_KINDS, DistillBatch, forward_kld, reverse_kld, topkld,
  topkld_grad, loss_and_grad, distill_loss, distill_grad, GaussianFit,
  bimodal_target, fit_gaussian_to_mixture)
from .qat import (
  CROSS_ENTROPY, QatConfig, FakeQuantSTE, WeightFakeQuant, DistillLoss,
  quantized_student, CurvePoint, TrainingCurve, teacher_probs,
  evaluate_student, qat_distill)

from .hessian import HessianEstimate, estimate_hessian, proxy_loss
from .gptq import GptqConfig, rtn, gptq, inverse_cholesky
from .gptvq import (
  VqConfig, VqStep, VqResult, gptvq_assign, hessian_kmeans, gptvq)
from .omniquant import (
  ACTIVATIONS, AffineBlock, OmniConfig, OmniResult, omniquant_block)

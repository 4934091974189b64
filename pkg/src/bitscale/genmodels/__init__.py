from .codebook import Codebook, build_codebook, vq_encode, vq_decode
from .data import (
  MarkovSource, ArDataset, MixtureSource, make_markov_source,
  make_markov_dataset, mixture_source, make_mixture_dataset, split)
from .ar import (
  LINEAR_LAYERS, ArConfig, ToyARModel, ArGeneration, new_ar_model,
  train_toy_ar, heldout_nll, sample_top_k, ar_generate, sequence_logits)
from .diffusion import (
  DENOISER_LAYERS, DiffusionSchedule, Denoiser, DenoiserConfig, ToyDenoiser,
  GaussianOracle, DiffusionSample, new_denoiser, train_toy_denoiser,
  denoiser_mse, diffusion_step, diffusion_sample, mixture_mmd)
from .pipelines import DiscretePipeline, ContinuousPipeline, final_output
from .checkpoints import save_checkpoint, load_checkpoint

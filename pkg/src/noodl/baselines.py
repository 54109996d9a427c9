"""Baseline learner: hard-thresholded correlation decoding, no descent.

The baseline shares every line of the main loop and differs in exactly one
setting: zero IHT steps, so each batch is decoded by the thresholded
correlation alone. Those coefficient values keep an O(sqrt(k) eps) bias,
which propagates into the gradient and leaves the dictionary error on a
plateau instead of driving it to zero.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .runner import RunResult, SolverConfig, run_noodl
from .synth import GenerativeConfig

__all__ = ["baseline_config", "run_biased_baseline"]


def baseline_config(cfg: SolverConfig) -> SolverConfig:
    """The same solver settings with the descent stage disabled (R = 0)."""
    return replace(cfg, coeff=replace(cfg.coeff, r_steps=0, delta_r=None))


def run_biased_baseline(a_star: np.ndarray, gen: GenerativeConfig,
                        cfg: SolverConfig) -> RunResult:
    """Run the learning loop with the biased thresholding decoder.

    Identical to ``run_noodl`` on ``baseline_config(cfg)``: the prediction
    stage stops at the thresholded initialization and the dictionary update
    is unchanged. The result is tagged ``algorithm="biased_ht"``.
    """
    result = run_noodl(a_star, gen, baseline_config(cfg))
    result.algorithm = "biased_ht"
    return result

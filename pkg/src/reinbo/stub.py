"""Synthetic evaluators that skip the ML entirely.

Used to study the search dynamics in isolation: every pipeline gets a known
attainable quality, reached at a pipeline-specific hyperparameter optimum.
"""

from __future__ import annotations

import zlib

import numpy as np

from reinbo.grammar import ConfiguredPipeline, PipelineGrammar, UnconfiguredPipeline


class StubEvaluator:
    """Reward = quality(pipeline) * response(hyperparameters) + noise.

    ``quality`` is ``top`` for the designated pipeline and
    ``base + step * m`` for the others, where ``m`` counts the stages that
    agree with the designated pipeline (so never more than
    ``base + step * (K - 1)``). ``response`` is 1 when ``width`` is None,
    otherwise a Gaussian bump of that width in the unit hypercube around an
    optimum fixed per pipeline. ``noise_sd`` scales heteroscedastic noise
    whose standard deviation ranges over [0.5, 1.5] * noise_sd with the
    hyperparameter position.
    """

    def __init__(
        self,
        grammar: PipelineGrammar,
        designated: tuple[int, ...] | None = None,
        top: float = 0.9,
        base: float = 0.3,
        step: float = 0.1,
        width: float | None = None,
        noise_sd: float = 0.0,
        seed: int = 0,
    ) -> None:
        self.grammar = grammar
        self.designated = UnconfiguredPipeline(designated or (1,) * grammar.K)
        grammar.validate(self.designated)
        self.top, self.base, self.step = top, base, step
        self.width = width
        self.noise_sd = noise_sd
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.calls = 0

    def quality(self, pipeline: UnconfiguredPipeline) -> float:
        if pipeline == self.designated:
            return self.top
        matches = sum(a == b for a, b in zip(pipeline.action_ids, self.designated.action_ids))
        return self.base + self.step * matches

    def optimum(self, pipeline: UnconfiguredPipeline) -> np.ndarray:
        key = self.grammar.pipeline_key(pipeline).encode()
        local = np.random.default_rng([self.seed, zlib.crc32(key)])
        return local.uniform(0.15, 0.85, self.grammar.dimension(pipeline))

    def expected(self, configured: ConfiguredPipeline) -> float:
        q = self.quality(configured.pipeline)
        if self.width is None or not configured.values:
            return q
        x = self.grammar.encode(configured)
        dist2 = float(((x - self.optimum(configured.pipeline)) ** 2).mean())
        return q * float(np.exp(-0.5 * dist2 / self.width**2))

    def __call__(self, configured: ConfiguredPipeline) -> float:
        self.calls += 1
        value = self.expected(configured)
        if self.noise_sd > 0:
            x = self.grammar.encode(configured)
            spread = 0.5 + (x.mean() if x.size else 0.5)
            value += self.rng.normal(scale=self.noise_sd * spread)
        return float(value)

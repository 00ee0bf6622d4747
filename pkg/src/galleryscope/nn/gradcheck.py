"""Central finite-difference verification of the analytic backward pass.

The difference quotients are evaluated with the network promoted to float64 so
the oracle's own noise stays far below the tolerance; the gradients under test
are whatever the production (float32) backward pass produced.

Relu/maxpool make the loss piecewise linear, so a fixed step straddling a kink
measures a slope average, not the derivative. Where the quotient at `step` and
at `step/4` disagree, the checker keeps shrinking the step until two scales
agree, and uses the finest quotient; `refined` counts how many elements needed
that. Per-element relative error is |ga - gn| / max(1, |ga|, |gn|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import softmax_cross_entropy
from .network import NetworkSpec, Params, network_backward, network_forward


@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float]
    flagged: list[str]
    tolerance: float
    refined: int = 0

    @property
    def passed(self) -> bool:
        return not self.flagged


def _loss64(spec: NetworkSpec, params64: Params, x64: np.ndarray, target: int) -> float:
    _, cache = network_forward(spec, params64, x64)
    loss, _ = softmax_cross_entropy(cache.logits[0], target)
    return loss


def finite_diff_grad_check(spec: NetworkSpec, params: Params, x: np.ndarray, target: int,
                           step: float = 1e-3, tolerance: float = 1e-3,
                           grads: Params | None = None) -> GradCheckReport:
    """Compare analytic parameter gradients against central finite differences.

    `grads` defaults to the production backward pass run on (params, x, target);
    passing explicit gradients lets callers audit an external backward
    implementation (or prove the check catches a corrupted one).
    """
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")

    if grads is None:
        _, cache = network_forward(spec, params, x)
        _, grad_logits = softmax_cross_entropy(cache.logits[0], target)
        grads = network_backward(spec, params, cache, grad_logits)

    params64 = {k: v.astype(np.float64) for k, v in params.items()}
    x64 = x.astype(np.float64)

    max_rel: dict[str, float] = {}
    flagged: list[str] = []
    refined = 0
    for name, tensor in params64.items():
        ga = grads[name].astype(np.float64).reshape(-1)
        flat = tensor.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]

            def quotient(h: float) -> float:
                flat[i] = orig + h
                lp = _loss64(spec, params64, x64, target)
                flat[i] = orig - h
                lm = _loss64(spec, params64, x64, target)
                flat[i] = orig
                return (lp - lm) / (2 * h)

            h = step
            gn = quotient(h)
            for _ in range(4):
                finer = quotient(h / 4)
                scale = max(1.0, abs(gn), abs(finer))
                if abs(finer - gn) <= 0.25 * tolerance * scale:
                    gn = finer
                    break
                refined += 1
                h /= 4
                gn = finer

            rel = abs(ga[i] - gn) / max(1.0, abs(ga[i]), abs(gn))
            worst = max(worst, rel)
        max_rel[name] = worst
        if worst > tolerance:
            flagged.append(name)
    return GradCheckReport(max_rel_error=max_rel, flagged=flagged, tolerance=tolerance,
                           refined=refined)

"""Monte-Carlo checks of the closed-form population loss and coarse gradient."""

from __future__ import annotations

import numpy as np

from .model import (
    GaussianSampler,
    Teacher,
    mc_estimate_grad,
    mc_estimate_loss,
    population_coarse_grad,
    population_loss,
)


def mc_instance(rng: np.random.Generator, max_n: int = 6, max_m: int = 6):
    """Random ``(w, teacher)`` with ``2 <= n <= max_n`` and ``1 <= m <= max_m``."""
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    w_star = rng.standard_normal(n)
    teacher = Teacher.from_vectors(w_star / np.linalg.norm(w_star), rng.standard_normal(m))
    return rng.standard_normal(n), teacher


def check_instance(w, teacher: Teacher, sampler: GaussianSampler, count: int,
                   sigmas: float = 4.0, constant_factor: float = 1.0) -> dict:
    """Compare closed forms with MC means; pass iff every |z| <= ``sigmas``.

    Loss and gradient are estimated from the same draws.
    """
    g_mean, g_se = mc_estimate_grad(w, teacher, sampler, count)
    l_mean, l_se = mc_estimate_loss(w, teacher, sampler, count)
    g = population_coarse_grad(w, teacher, constant=teacher.constant * constant_factor)
    f = population_loss(w, teacher)
    with np.errstate(divide="ignore", invalid="ignore"):
        gz = np.where(g_se > 0, (g - g_mean) / g_se, np.where(g == g_mean, 0.0, np.inf))
    lz = (f - l_mean) / l_se if l_se > 0 else (0.0 if f == l_mean else np.inf)
    return {
        "n": teacher.n,
        "m": teacher.m,
        "grad_closed_form": [float(x) for x in g],
        "grad_mc_mean": [float(x) for x in g_mean],
        "grad_mc_se": [float(x) for x in g_se],
        "grad_z": [float(x) for x in gz],
        "loss_closed_form": f,
        "loss_mc_mean": l_mean,
        "loss_mc_se": l_se,
        "loss_z": float(lz),
        "passed": bool(np.all(np.abs(gz) <= sigmas) and abs(lz) <= sigmas),
    }


def run_suite(seed: int = 0, count: int = 1_000_000, instances: int = 20, sigmas: float = 4.0,
              constant_factor: float = 1.0, max_n: int = 6, max_m: int = 6) -> dict:
    """Closed form vs Monte Carlo on ``instances`` random problems.

    ``constant_factor`` scales the gradient constant in the closed form only;
    anything other than 1 is a negative control and should fail.
    """
    rng = np.random.default_rng(seed)
    results = []
    for i in range(instances):
        w, teacher = mc_instance(rng, max_n, max_m)
        stream_seed = int(np.random.SeedSequence([seed, i]).generate_state(1, dtype=np.uint64)[0])
        results.append(check_instance(w, teacher, GaussianSampler(stream_seed), count, sigmas, constant_factor))
    return {
        "seed": seed,
        "count": count,
        "instances": instances,
        "sigmas": sigmas,
        "constant_factor": constant_factor,
        "passed": all(r["passed"] for r in results),
        "results": results,
    }

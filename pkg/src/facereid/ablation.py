"""Four-configuration ablation harness and the relative-gain metric.

The grid toggles the two protective components independently:

* exp1: candidate validation off, post-filter off
* exp2: candidate validation on, post-filter off
* exp3: candidate validation off, post-filter on
* exp4: both on (identical to the base parameters)

The relative gain compares the full configuration's identity count against
the mean of the three ablated ones.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .pipeline import run
from .providers import engine_packets, simulate
from .scenario import ScenarioScript
from .types import EngineParams, ValidationPolicy

LABELS = ("exp1", "exp2", "exp3", "exp4")


@dataclass(frozen=True)
class AblationConfig:
    label: str
    params: EngineParams


@dataclass(frozen=True)
class AblationReport:
    """Active-identity counts per configuration plus the gain metric."""

    counts: dict[str, int]
    true_count: int | None = None
    gamma_percent: float | None = None


def ablation_grid(base: EngineParams) -> tuple[AblationConfig, ...]:
    """The 2x2 toggle grid derived from fully enabled base parameters."""
    if base.t_min <= 0:
        raise ValueError("ablation base must have the post-filter enabled (t_min > 0)")
    if base.validation_policy is ValidationPolicy.OFF:
        raise ValueError("ablation base must have candidate validation enabled")
    return (
        AblationConfig("exp1", replace(base, validation_policy=ValidationPolicy.OFF, t_min=0)),
        AblationConfig("exp2", replace(base, t_min=0)),
        AblationConfig("exp3", replace(base, validation_policy=ValidationPolicy.OFF)),
        AblationConfig("exp4", base),
    )


def gamma(e1: float, e2: float, e3: float, e4: float) -> float:
    """Relative gain in percent, reported to one decimal.

    ``(1 - e4 / mean(e1, e2, e3)) * 100``; the three ablated counts must
    not average to zero.
    """
    mean = (e1 + e2 + e3) / 3.0
    if mean == 0:
        raise ValueError("gamma is undefined when the ablated counts average to zero")
    return round((1.0 - e4 / mean) * 100.0, 1)


def run_ablation(
    script: ScenarioScript,
    base: EngineParams,
    *,
    parallel: bool = False,
) -> AblationReport:
    """Run the identical synthetic stream through all four configurations.

    The simulator is a pure function of the script, so every configuration
    consumes a byte-identical stream. ``parallel`` runs the four
    independent configurations in a thread pool.
    """
    configs = ablation_grid(base)

    def one(config: AblationConfig) -> tuple[str, int]:
        summary = run(
            engine_packets(simulate(script, embedding_dim=config.params.embedding_dim)),
            config.params,
            sink=None,
            deterministic=True,
            provider={"kind": "synthetic", "seed": script.seed},
        )
        return config.label, summary.gallery["active"]

    if parallel:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=len(configs)) as pool:
            counts = dict(pool.map(one, configs))
    else:
        counts = dict(one(config) for config in configs)

    try:
        gain = gamma(counts["exp1"], counts["exp2"], counts["exp3"], counts["exp4"])
    except ValueError:
        gain = None
    return AblationReport(
        counts={label: counts[label] for label in LABELS},
        true_count=len(script.persons),
        gamma_percent=gain,
    )


def report_from_counts(counts: Sequence[int]) -> AblationReport:
    """Report from four externally measured identity counts."""
    if len(counts) != 4:
        raise ValueError(f"expected 4 counts (exp1..exp4), got {len(counts)}")
    e1, e2, e3, e4 = (int(c) for c in counts)
    return AblationReport(
        counts={"exp1": e1, "exp2": e2, "exp3": e3, "exp4": e4},
        true_count=None,
        gamma_percent=gamma(e1, e2, e3, e4),
    )


def format_report(report: AblationReport) -> str:
    lines = ["config  active_identities"]
    for label in LABELS:
        lines.append(f"{label:<7} {report.counts[label]}")
    if report.true_count is not None:
        lines.append(f"true    {report.true_count}")
    if report.gamma_percent is not None:
        lines.append(f"relative gain: {report.gamma_percent:.1f}%")
    else:
        lines.append("relative gain: n/a")
    return "\n".join(lines)


def write_report_csv(report: AblationReport, path: str | Path) -> None:
    lines = ["config,active_identities"]
    for label in LABELS:
        lines.append(f"{label},{report.counts[label]}")
    if report.true_count is not None:
        lines.append(f"true,{report.true_count}")
    if report.gamma_percent is not None:
        lines.append(f"gamma_percent,{report.gamma_percent:.1f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

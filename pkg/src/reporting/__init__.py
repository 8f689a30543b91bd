"""
Ablation Reporting Module

Runs the loss-mode ablation and writes its summary as CSV and as a
Markdown report rendered with Jinja2 templates.
"""

from .ablation import (
    MODES,
    AblationRow,
    AblationSummary,
    ReportGenerator,
    run_ablation,
    score_checkpoint,
)

__all__ = [
    "MODES",
    "AblationRow",
    "AblationSummary",
    "ReportGenerator",
    "run_ablation",
    "score_checkpoint",
]

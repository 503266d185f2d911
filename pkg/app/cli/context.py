"""
Per-invocation state shared by all subcommands.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from app.cli.experiment import ResolvedExperiment, load_config, resolve
from app.cli.output import OutputWriter, echo_report
from app.schemas.base import new_run_id
from app.schemas.experiment import ExperimentKind
from app.schemas.reports import RunReport


@dataclass
class RunContext:
    """Values of the common flags plus the run identifier."""
    config_path: Optional[str] = None
    out_dir: Optional[str] = None
    tol: Optional[float] = None
    seed: Optional[int] = None
    threads: Optional[int] = None
    run_id: str = field(default_factory=new_run_id)

    def resolve(self, kind: ExperimentKind) -> ResolvedExperiment:
        return resolve(load_config(self.config_path, kind), seed=self.seed)

    def tolerance(self, resolved: ResolvedExperiment, name: str, default: float) -> float:
        """--tol wins over the document's tolerances, which win over settings."""
        if self.tol is not None:
            return self.tol
        return resolved.config.tolerance(name, default)

    def writer(self, resolved: ResolvedExperiment) -> OutputWriter:
        directory = Path(self.out_dir or resolved.config.output.directory)
        return OutputWriter(directory, resolved.config.output.formats)

    def finish(
        self,
        writer: OutputWriter,
        resolved: ResolvedExperiment,
        command: str,
        message: str,
        results: Dict[str, Any],
        with_manifold: bool = True,
        warnings: Optional[list] = None,
    ) -> RunReport:
        """Assemble, write and print the run report."""
        report = RunReport(
            success=True,
            message=message,
            command=command,
            run_id=self.run_id,
            parameters=resolved.parameters(),
            manifold=resolved.manifold_summary() if with_manifold else None,
            results=results,
            warnings=list(resolved.warnings) + list(warnings or []),
        )
        writer.report(f"{command.replace('-', '_')}_report.json", report)
        echo_report(report)
        return report

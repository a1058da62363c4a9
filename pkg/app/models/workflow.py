"""
Run state models - experiment execution state, results and manifests
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from .config import LabConfig


class CheckResult(BaseModel):
    """One named pass/fail check with its measured value"""
    name: str = Field(..., description="Check identifier")
    passed: Optional[bool] = Field(None, description="Outcome; None when the check only reports")
    value: Any = Field(None, description="Measured value or residual")
    threshold: Any = Field(None, description="Acceptance threshold")
    details: Dict[str, Any] = Field(default_factory=dict, description="Extra diagnostics")


class ExperimentResult(BaseModel):
    """
    Output of one experiment runner.

    ``tables`` are written as CSV (one file per key), ``summary`` goes into
    the JSON summary, and ``paths`` holds named LTEX payloads.
    """
    experiment: str = Field(..., description="Experiment name")
    checks: List[CheckResult] = Field(default_factory=list, description="Pass/fail checks")
    summary: Dict[str, Any] = Field(default_factory=dict, description="Scalar results")
    tables: Dict[str, Any] = Field(default_factory=dict, description="Name -> pandas DataFrame")
    paths: Dict[str, bytes] = Field(default_factory=dict, description="Name -> LTEX payload")
    notes: List[str] = Field(default_factory=list, description="Diagnostics")

    class Config:
        """Pydantic model configuration"""
        arbitrary_types_allowed = True

    def add_check(self, name: str, passed: Optional[bool], value: Any = None, threshold: Any = None,
                  **details: Any) -> CheckResult:
        check = CheckResult(name=name, passed=passed, value=value, threshold=threshold, details=details)
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        """Every decided check passed"""
        return all(check.passed is not False for check in self.checks)


class ManifestEntry(BaseModel):
    """One emitted artifact"""
    path: str = Field(..., description="Path relative to the run directory")
    size: int = Field(..., ge=0, description="File size in bytes")
    xxh3_64: str = Field(..., description="Content hash")


class Manifest(BaseModel):
    """Every file a run emitted, with hashes; the only place timestamps live"""
    experiment: str = Field(..., description="Experiment name")
    version: str = Field(..., description="Code version")
    created: str = Field(..., description="UTC timestamp of the run")
    files: List[ManifestEntry] = Field(default_factory=list, description="Artifacts")


class RunState(BaseModel):
    """
    State of one lab run.

    Carries the validated config through the runner and collects non-fatal
    errors so the CLI can report them and choose the exit code.
    """

    config: LabConfig = Field(..., description="Validated experiment config")
    output_dir: str = Field(..., description="Resolved output directory")
    result: Optional[ExperimentResult] = Field(None, description="Runner output")
    manifest: Optional[Manifest] = Field(None, description="Written artifacts")
    current_step: str = Field(default="validate", description="Current run step identifier")
    errors: List[str] = Field(default_factory=list, description="Accumulated errors during the run")

    class Config:
        """Pydantic model configuration"""
        arbitrary_types_allowed = True

    def add_error(self, error: str) -> None:
        """Add an error to the error list"""
        self.errors.append(error)

    def has_errors(self) -> bool:
        """Check if any errors have occurred"""
        return len(self.errors) > 0

    def get_check_summary(self) -> Dict[str, int]:
        """Counts of passed, failed and report-only checks"""
        checks = self.result.checks if self.result else []
        return {
            "passed": sum(1 for c in checks if c.passed is True),
            "failed": sum(1 for c in checks if c.passed is False),
            "reported": sum(1 for c in checks if c.passed is None),
        }

"""
Artifact writer for lab runs.

Writes CSV tables, the JSON summary, LTEX path dumps, a markdown run report
and the manifest. CSV and JSON bodies are deterministic for a fixed config;
the manifest carries the only timestamp.
"""

import os
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import orjson
import pandas as pd
from jinja2 import Template

from ..models.workflow import ExperimentResult, Manifest, ManifestEntry, RunState
from ..utils.data_transform import format_label, to_builtin
from ..utils.file_ops import describe_file, ensure_directory, sanitize_filename, write_bytes

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY


def dumps_json(document: Any) -> bytes:
    """Sorted, indented JSON; floats in shortest round-trip form"""
    return orjson.dumps(to_builtin(document), option=JSON_OPTIONS) + b"\n"


def csv_bytes(frame: pd.DataFrame) -> bytes:
    """CSV body with 17 significant digits and Unix line endings"""
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n").encode("utf-8")


def emit_summary(result: Optional[ExperimentResult], config: Dict[str, Any], version: str) -> Dict[str, Any]:
    """
    JSON summary document for a run.

    Args:
        result: runner output; None gives a document with empty sections
        config: config echo (``LabConfig.model_dump(mode="json")``)
        version: code version

    Returns:
        Plain dict ready for dumps_json
    """
    if result is None:
        return {"experiment": config.get("experiment"), "version": version, "config": config,
                "checks": [], "summary": {}, "notes": [], "passed": None}
    return {
        "experiment": result.experiment,
        "version": version,
        "config": config,
        "checks": [check.model_dump() for check in result.checks],
        "summary": result.summary,
        "notes": list(result.notes),
        "passed": result.passed,
    }


class ArtifactWriter:
    """
    Single writer for every file a run emits.

    Workers hand results back to the runner; only this class touches the
    output directory.
    """

    def __init__(self, verbose: bool = True):
        """Initialize artifact writer with the markdown report template"""
        self.report_template = self._load_report_template()
        self.verbose = verbose
        if verbose:
            print("📝 ArtifactWriter initialized")

    def run_directory(self, output_dir: str, experiment: str, label: str) -> str:
        """<output>/<experiment>_<mechanism label>"""
        name = sanitize_filename(f"{experiment}_{label}")
        return ensure_directory(os.path.join(output_dir, name))

    def write_table(self, run_dir: str, name: str, frame: pd.DataFrame) -> str:
        return write_bytes(os.path.join(run_dir, f"{sanitize_filename(name)}.csv"), csv_bytes(frame))

    def write_json(self, run_dir: str, name: str, document: Any) -> str:
        return write_bytes(os.path.join(run_dir, f"{sanitize_filename(name)}.json"), dumps_json(document))

    def write_path(self, run_dir: str, name: str, payload: bytes) -> str:
        return write_bytes(os.path.join(run_dir, "paths", f"{sanitize_filename(name)}.ltex"), payload)

    def write_report(self, run_dir: str, document: Dict[str, Any]) -> str:
        """Render the markdown run report from the summary document"""
        text = Template(self.report_template).render(
            doc=to_builtin(document),
            label=format_label(str(document.get("config", {}).get("mechanism", {}).get("label") or "")),
        )
        return write_bytes(os.path.join(run_dir, "report.md"), text.encode("utf-8"))

    def write_manifest(self, run_dir: str, experiment: str, version: str, files: List[str]) -> Manifest:
        manifest = Manifest(
            experiment=experiment,
            version=version,
            created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            files=[ManifestEntry(**describe_file(path, run_dir)) for path in sorted(files)],
        )
        write_bytes(os.path.join(run_dir, "manifest.json"), dumps_json(manifest.model_dump()))
        return manifest

    def write_run(self, state: RunState, version: str) -> Manifest:
        """
        Write every artifact of a finished run and its manifest.

        Args:
            state: run state holding the config and the runner result
            version: code version recorded in the summary and manifest

        Returns:
            Manifest of the written files
        """
        config = state.config
        result = state.result
        label = result.summary.get("mechanism", {}).get("label", "run") if result else "run"
        run_dir = self.run_directory(state.output_dir, config.experiment, str(label))

        files: List[str] = []
        if result is not None:
            for name, frame in sorted(result.tables.items()):
                files.append(self.write_table(run_dir, name, frame))
            if config.output.write_paths:
                for name, payload in sorted(result.paths.items()):
                    files.append(self.write_path(run_dir, name, payload))

        document = emit_summary(result, config.model_dump(mode="json"), version)
        if state.errors:
            document["errors"] = list(state.errors)
        files.append(self.write_json(run_dir, "summary", document))
        if config.output.write_report:
            files.append(self.write_report(run_dir, document))

        manifest = self.write_manifest(run_dir, config.experiment, version, files)
        if self.verbose:
            print(f"✅ Wrote {len(files)} artifacts to {run_dir}")
        return manifest

    def _load_report_template(self) -> str:
        """Load the markdown report template"""
        return """# {{ doc.experiment }}{% if label %} - {{ label }}{% endif %}

Version {{ doc.version }}. Outcome: {% if doc.passed is none %}report only{% elif doc.passed %}PASS{% else %}FAIL{% endif %}

## Checks

{% if doc.checks %}| check | passed | value | threshold | details |
|---|---|---|---|---|
{% for check in doc.checks %}| {{ check.name }} | {{ check.passed }} | {{ check.value }} | {{ check.threshold }} | {% for key, value in check.details | dictsort %}{{ key }}={{ value }}{% if not loop.last %}, {% endif %}{% endfor %} |
{% endfor %}{% else %}No checks.
{% endif %}
## Summary

{% for key, value in doc.summary | dictsort %}- **{{ key }}**: {{ value }}
{% else %}Empty.
{% endfor %}
{% if doc.notes %}## Notes

{% for note in doc.notes %}- {{ note }}
{% endfor %}{% endif %}{% if doc.errors %}## Errors

{% for error in doc.errors %}- {{ error }}
{% endfor %}{% endif %}"""


# Global writer instance
artifact_writer = ArtifactWriter()

__all__: List[str] = ["ArtifactWriter", "artifact_writer", "emit_summary", "dumps_json", "csv_bytes", "JSON_OPTIONS"]

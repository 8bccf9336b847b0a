import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

import pytz

from .base import BaseReportWriter
from .local import LocalReportWriter, to_jsonable

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    """
    Outcome of one subcommand.

    Attributes:
        command (str): Subcommand name.
        checks (List[Dict[str, Any]]): One {'name', 'value', 'passed'} entry per acceptance check.
        results (Dict[str, Any]): Command-specific numbers and documents.
        tables (Dict[str, List[Dict[str, Any]]]): CSV artifacts by name, in insertion order.
        inputs (List[str]): Input files whose hashes go into the manifest.
        documents (Dict[str, Dict[str, Any]]): JSON artifacts by name.
        streams (Dict[str, List[Dict[str, Any]]]): JSON lines streams by name. Records go straight
            to `writer` when one is attached and are buffered here otherwise.
        writer (Optional[BaseReportWriter]): Destination for streamed records during the run.
    """
    command: str
    checks: List[Dict[str, Any]] = field(default_factory=list)
    results: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    inputs: List[str] = field(default_factory=list)
    documents: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    streams: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    writer: Optional[BaseReportWriter] = field(default=None, repr=False)

    def check(self, name: str, value: Any, passed: bool) -> None:
        self.checks.append({'name': name, 'value': value, 'passed': bool(passed)})

    def stream(self, name: str, record: Dict[str, Any]) -> None:
        buffered = self.streams.setdefault(name, [])
        if self.writer is None:
            buffered.append(record)
        else:
            self.writer.append_record(name, record)

    @property
    def passed(self) -> bool:
        return all(item['passed'] for item in self.checks)


def config_hash(config_data: Dict[str, Any]) -> str:
    canonical = json.dumps(to_jsonable(config_data), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def file_hash(path: str) -> Optional[str]:
    if not os.path.isfile(path):
        return None
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def emit_report(result: CommandResult,
                output_dir: str,
                configuration: Dict[str, Any],
                versions: Dict[str, str],
                writer: Optional[BaseReportWriter] = None) -> str:
    """
    Writes report.json (sorted keys, no timestamps), the numbered CSV artifacts, the JSON
    documents, any buffered streams and manifest.json, and returns the report path.
    """
    writer = writer or result.writer or LocalReportWriter(output_dir)
    writer.connect()
    if writer is not result.writer:
        for name, records in result.streams.items():
            for record in records:
                writer.append_record(name, record)
    digest = config_hash(configuration)
    report = {
        'command': result.command,
        'passed': result.passed,
        'checks': result.checks,
        'results': result.results,
        'config_hash': digest,
        'versions': versions,
    }
    artifacts = [writer.write_table(name, rows) for name, rows in result.tables.items()]
    artifacts += [writer.write_document(name, document) for name, document in result.documents.items()]
    artifacts += [f"{name}.jsonl" for name in result.streams]
    path = writer.write_report(report)
    writer.write_manifest({
        'command': result.command,
        'config_hash': digest,
        'versions': versions,
        'inputs': {item: file_hash(item) for item in result.inputs},
        'artifacts': [os.path.basename(item) for item in artifacts],
        'created_utc': datetime.now(pytz.utc).isoformat(),
    })
    logger.info("Report written to %s (%d artifacts)", path, len(artifacts))
    return path

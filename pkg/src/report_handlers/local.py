import json
import logging
import os
import sys
import inspect
from typing import Any, Dict, List

import pandas as pd

from .base import BaseReportWriter

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Converts numpy scalars, arrays and complex numbers into plain JSON values."""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if hasattr(value, 'tolist') and not isinstance(value, (str, bytes)):
        return to_jsonable(value.tolist())
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if isinstance(value, float) and value != value:
        return None
    if isinstance(value, float) and value in (float('inf'), float('-inf')):
        return 'inf' if value > 0 else '-inf'
    return value


class LocalReportWriter(BaseReportWriter):
    """
    Writes reports to a folder on the local filesystem.

    Attributes:
        folder_path (str): Output directory.
        table_count (int): Number of CSV artifacts written so far; numbers the next one.
        streams (set): Names of the JSON lines streams started by this writer.
    """
    ALL_POSSIBLE_ERRORS = (
            PermissionError,
            FileNotFoundError,
            OSError,
            TypeError,
            ValueError,
            )

    def __init__(self, folder_path: str) -> None:
        super().__init__()
        self.folder_path = folder_path
        self.table_count = 0
        self.streams = set()

    def connect(self) -> None:
        """
        Creates the output folder if necessary.
        """
        try:
            os.makedirs(self.folder_path, exist_ok=True)
            logger.info("Output folder '%s' is ready.", self.folder_path)
        except self.ALL_POSSIBLE_ERRORS as e:
            self._handle_errors(e)
            sys.exit(1)

    def _write_json(self, document: Dict[str, Any], filename: str) -> str:
        output_path = os.path.join(self.folder_path, filename)
        with open(output_path, 'w') as f:
            json.dump(to_jsonable(document), f, indent=4, sort_keys=True)
            f.write('\n')
        return output_path

    def write_report(self, report: Dict[str, Any]) -> str:
        try:
            return self._write_json(report, 'report.json')
        except self.ALL_POSSIBLE_ERRORS as e:
            self._handle_errors(e, additional_context="File: report.json")
            sys.exit(1)

    def write_table(self, name: str, rows: List[Dict[str, Any]]) -> str:
        """
        Writes rows as NNN_<name>.csv, numbering artifacts in the order they are written.
        """
        self.table_count += 1
        filename = f"{self.table_count:03d}_{name}.csv"
        try:
            output_path = os.path.join(self.folder_path, filename)
            pd.DataFrame(to_jsonable(rows)).to_csv(output_path, index=False)
            logger.debug("Wrote %d rows to %s", len(rows), output_path)
            return output_path
        except self.ALL_POSSIBLE_ERRORS as e:
            self._handle_errors(e, additional_context=f"File: {filename}")
            sys.exit(1)

    def append_record(self, name: str, record: Dict[str, Any]) -> str:
        filename = f"{name}.jsonl"
        try:
            output_path = os.path.join(self.folder_path, filename)
            with open(output_path, 'a' if name in self.streams else 'w') as f:
                f.write(json.dumps(to_jsonable(record), sort_keys=True) + '\n')
            self.streams.add(name)
            return output_path
        except self.ALL_POSSIBLE_ERRORS as e:
            self._handle_errors(e, additional_context=f"File: {filename}")
            sys.exit(1)

    def write_document(self, name: str, document: Dict[str, Any]) -> str:
        try:
            return self._write_json(document, f"{name}.json")
        except self.ALL_POSSIBLE_ERRORS as e:
            self._handle_errors(e, additional_context=f"File: {name}.json")
            sys.exit(1)

    def write_manifest(self, manifest: Dict[str, Any]) -> str:
        try:
            return self._write_json(manifest, 'manifest.json')
        except self.ALL_POSSIBLE_ERRORS as e:
            self._handle_errors(e, additional_context="File: manifest.json")
            sys.exit(1)

    def _handle_errors(self, exception: Exception, additional_context: str = ''):
        """Logs filesystem and serialization errors with a descriptive message."""

        # Get the name of the calling function to determine the context
        calling_function = inspect.stack()[1].function
        contexts = {
            'connect': 'creating the output folder',
            'write_report': 'writing the report',
            'write_table': 'writing a table',
            'append_record': 'streaming a record',
            'write_document': 'writing a document',
            'write_manifest': 'writing the manifest',
        }
        context = contexts.get(calling_function, calling_function)

        if additional_context:
            additional_context = f"\nAdditional context: {additional_context}"

        if isinstance(exception, PermissionError):
            error_message = (
                f"Error while {context}: insufficient permissions to write to "
                f"'{self.folder_path}'. Please check folder permissions.{additional_context}"
            )
        elif isinstance(exception, FileNotFoundError):
            error_message = (
                f"Error while {context}: the directory '{self.folder_path}' does not exist."
                f"{additional_context}"
            )
        elif isinstance(exception, OSError):
            error_message = (
                f"Error while {context}: unable to create or access '{self.folder_path}'. "
                f"Details: {exception}{additional_context}"
            )
        elif isinstance(exception, (TypeError, ValueError)):
            error_message = (
                f"Error while {context}: the data could not be serialized. "
                f"Details: {exception}{additional_context}"
            )
        else:
            error_message = (
                f"Unexpected error while {context} in '{self.folder_path}'. "
                f"Details: {exception}{additional_context}"
            )

        logger.error(error_message)

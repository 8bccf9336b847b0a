from abc import ABC, abstractmethod
from typing import Any, Dict, List


class BaseReportWriter(ABC):
    """
    Abstract base class for report writers.

    Provides a consistent interface for classes that persist the outcome of a run:
    the JSON report, numbered CSV artifacts and a manifest describing the inputs.
    """

    @abstractmethod
    def connect(self) -> None:
        """
        Prepares the destination, e.g. creates the output directory.
        """
        pass

    @abstractmethod
    def write_report(self, report: Dict[str, Any]) -> str:
        """
        Writes the report document and returns where it went.

        Args:
            report (Dict[str, Any]): JSON-serializable report.
        """
        pass

    @abstractmethod
    def write_table(self, name: str, rows: List[Dict[str, Any]]) -> str:
        """
        Writes one tabular artifact and returns where it went.

        Args:
            name (str): Short artifact name; the writer adds a sequence number.
            rows (List[Dict[str, Any]]): One mapping per row.
        """
        pass

    @abstractmethod
    def write_manifest(self, manifest: Dict[str, Any]) -> str:
        """
        Writes the manifest of inputs, versions and timestamp.
        """
        pass

    @abstractmethod
    def append_record(self, name: str, record: Dict[str, Any]) -> str:
        """
        Appends one record to the JSON lines stream <name>.jsonl, starting it on first use.

        Args:
            name (str): Stream name.
            record (Dict[str, Any]): JSON-serializable record, written as one line.
        """
        pass

    @abstractmethod
    def write_document(self, name: str, document: Dict[str, Any]) -> str:
        """
        Writes a JSON artifact <name>.json.
        """
        pass

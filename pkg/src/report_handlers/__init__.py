from .base import BaseReportWriter
from .local import LocalReportWriter, to_jsonable
from .report import CommandResult, emit_report, config_hash, file_hash

"""
Report assembly shared by every check-style operation.

Checks never raise for findings; they collect them in a ``ReportBuilder``
and hand back a plain dict that the CLI renders as text or JSON.
"""

import logging

logger = logging.getLogger(__name__)


class ReportBuilder:
    """Collects errors, warnings and summary values for one check."""

    def __init__(self, subject):
        self.subject = subject
        self.errors = []
        self.warnings = []
        self.summary = {}

    def error(self, message):
        logger.debug("%s: %s", self.subject, message)
        self.errors.append(message)

    def warn(self, message):
        logger.debug("%s (warning): %s", self.subject, message)
        self.warnings.append(message)

    def check(self, condition, message):
        """Record message as an error unless condition holds; return condition."""
        if not condition:
            self.error(message)
        return bool(condition)

    def note(self, **values):
        self.summary.update(values)

    def extend(self, other_report, prefix=None):
        """Fold another report's findings into this one."""
        for message in other_report.get("errors", []):
            self.error(f"{prefix}: {message}" if prefix else message)
        for message in other_report.get("warnings", []):
            self.warn(f"{prefix}: {message}" if prefix else message)

    @property
    def ok(self):
        return not self.errors

    def result(self, **extra):
        """
        Build the report dict.

        Returns:
            dict: ``subject``, ``valid``, ``errors``, ``warnings``, ``summary``
            plus any extra keys passed in.
        """
        report = {
            "subject": self.subject,
            "valid": not self.errors,
            "errors": list(self.errors),
            "warnings": list(self.warnings),
            "summary": dict(self.summary),
        }
        report.update(extra)
        return report

"""
Text styling for command reports.
Layout constants and the renderers that turn report values into stable text.
"""

from fractions import Fraction

from utils.helpers import format_fraction

RULE_WIDTH = 60
RULE = "=" * RULE_WIDTH
THIN_RULE = "-" * RULE_WIDTH
INDENT = "  "
KEY_WIDTH = 22

OK_MARK = "ok"
FAIL_MARK = "FAILED"
WARN_MARK = "warning"


def render_value(value):
    """Plain text for a report value; rationals as p/q, collections sorted when unordered."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, Fraction):
        return format_fraction(value)
    if isinstance(value, (set, frozenset)):
        return "{" + ", ".join(render_value(x) for x in sorted(value)) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(render_value(x) for x in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {render_value(v)}" for k, v in sorted(value.items())) + "}"
    return str(value)


def render_header(title):
    return f"{RULE}\n{title}\n{RULE}"


def render_pairs(pairs, indent=""):
    """Aligned ``key: value`` lines, in the order given."""
    lines = []
    for key, value in pairs:
        label = f"{key}:".ljust(KEY_WIDTH)
        lines.append(f"{indent}{label}{render_value(value)}")
    return "\n".join(lines)


def render_table(rows, headers):
    """Left-aligned columns separated by two spaces."""
    cells = [[str(h) for h in headers]] + [[render_value(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    out = []
    for n, row in enumerate(cells):
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if n == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)


def render_findings(report):
    """Status line plus the report's errors and warnings."""
    lines = [f"status: {OK_MARK if report['valid'] else FAIL_MARK}"]
    for message in report.get("errors", []):
        lines.append(f"{INDENT}error: {message}")
    for message in report.get("warnings", []):
        lines.append(f"{INDENT}{WARN_MARK}: {message}")
    return "\n".join(lines)


def render_report(title, report, extra=()):
    """A full block: header, findings, then the summary values."""
    parts = [render_header(title), render_findings(report)]
    summary = list(extra) + sorted(report.get("summary", {}).items())
    if summary:
        parts.append(THIN_RULE)
        parts.append(render_pairs(summary))
    return "\n".join(parts)


def render_block(title, pairs):
    return "\n".join([render_header(title), render_pairs(pairs)])

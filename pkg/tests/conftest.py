"""Prints a one-line verdict per acceptance criterion after the run."""

import re

CRITERIA = {
    1: "gradient correctness",
    2: "parameter counts",
    3: "perplexity analytics",
    4: "optimization sanity",
    5: "scheduler and early-stop contract",
    6: "masking statistics",
    7: "scoring oracles",
    8: "synthetic-grammar direction reproduction",
    9: "clustering and projection correctness",
    10: "pipeline determinism",
    11: "external corpus hook",
}

_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for status, word in (("passed", "PASS"), ("failed", "FAIL"),
                         ("error", "FAIL"), ("skipped", "SKIP")):
        for report in terminalreporter.stats.get(status, []):
            match = _PATTERN.search(getattr(report, "nodeid", ""))
            if match:
                verdicts[int(match.group(1))] = word
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(verdicts):
        title = CRITERIA.get(number, "")
        terminalreporter.write_line(
            f"criterion {number:2d} ({title}): {verdicts[number]}")

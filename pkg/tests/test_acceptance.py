"""Full-size acceptance experiments, one per criterion (about ten minutes on one core)."""

from pathlib import Path

import pytest

from aktest.harness import load_config, run_experiment

from conftest import ACCEPTANCE_LINES

CONFIGS = sorted((Path(__file__).resolve().parent.parent / "configs").glob("c[0-9][0-9]_*.yaml"))


@pytest.mark.acceptance
@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_criterion(path):
    number = int(path.stem[1:3])
    report = run_experiment(load_config(path), threads=1)
    detail = "; ".join(report.criterion_lines())
    line = f"{'PASS' if report.passed else 'FAIL'} C{number} {path.stem[4:]}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert report.passed, detail


def test_one_config_per_criterion():
    assert [int(p.stem[1:3]) for p in CONFIGS] == list(range(1, 12))

# -*- coding: utf-8 -*-

import math

import pandas as pd
import pytest

from PDE.metrics import evaluate
from PDE.problems import problem_dirichlet_sine
from runner.report import (
    REFERENCE_COLUMNS,
    REPORT_FILE,
    ReportError,
    merge_reports,
    ordering_notes,
    to_markdown,
    write_report,
)

NODES = [0.5, 1.0]


def _run_dir(root, name, method, dims, scale):
    directory = root / name
    directory.mkdir()
    reports = []
    for dim in dims:
        problem = problem_dirichlet_sine(dim)
        reports.append(
            evaluate(lambda k, t, x: scale * problem.exact(t, x), problem, NODES, n_test=16, method=method)
        )
    frame = pd.concat([r.rows for r in reports], ignore_index=True)
    frame.to_csv(directory / REPORT_FILE, index=False)
    return str(directory)


def test_merge_sorts_and_adds_reference(tmp_path):
    nitsche = _run_dir(tmp_path, "a", "nitsche", [3, 2], 1.01)
    dgm = _run_dir(tmp_path, "b", "dgm", [2], 1.1)
    merged = merge_reports([nitsche, dgm])

    assert merged[["d", "method"]].values.tolist() == [[2, "dgm"], [2, "nitsche"], [3, "nitsche"]]
    assert merged["run"].tolist() == ["b", "a", "a"]
    assert merged.loc[1, REFERENCE_COLUMNS[0]] == 1.6e-2
    assert merged.loc[0, REFERENCE_COLUMNS[0]] == 9.9e-2
    assert merged.loc[0, "L2 relative error"] == pytest.approx(0.1)


def test_missing_reference_is_nan(tmp_path):
    merged = merge_reports([_run_dir(tmp_path, "a", "nitsche", [4], 1.0)])
    assert math.isnan(merged.loc[0, REFERENCE_COLUMNS[0]])


def test_missing_reports_are_listed(tmp_path):
    present = _run_dir(tmp_path, "a", "nitsche", [2], 1.0)
    (tmp_path / "empty1").mkdir()
    with pytest.raises(ReportError) as info:
        merge_reports([present, str(tmp_path / "empty1"), str(tmp_path / "empty2")])
    message = str(info.value)
    assert "empty1" in message and "empty2" in message
    assert "/a/" not in message


def test_empty_input():
    with pytest.raises(ReportError):
        merge_reports([])


def test_missing_columns(tmp_path):
    directory = tmp_path / "bad"
    directory.mkdir()
    pd.DataFrame({"d": [2]}).to_csv(directory / REPORT_FILE, index=False)
    with pytest.raises(ReportError):
        merge_reports([str(directory)])


def test_write_report_with_markdown(tmp_path):
    run = _run_dir(tmp_path, "a", "nitsche", [2], 1.0)
    output = tmp_path / "out" / "merged.csv"
    markdown = tmp_path / "merged.md"
    write_report([run], str(output), str(markdown))

    assert len(pd.read_csv(output)) == 1
    lines = markdown.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("| method | d | L2 relative error")
    assert lines[2].startswith("| nitsche | 2 | 0.0e+00")
    assert "1.6e-02" in lines[2]


def test_markdown_formats_missing_values():
    frame = pd.DataFrame({"method": ["jko"], "value": [float("nan")]})
    assert to_markdown(frame).splitlines()[-1] == "| jko | - |"


def test_reversed_ordering_is_noted(tmp_path):
    nitsche = _run_dir(tmp_path, "a", "nitsche", [2, 3], 1.1)
    dgm = _run_dir(tmp_path, "b", "dgm", [2], 1.01)
    merged = merge_reports([nitsche, dgm])
    notes = ordering_notes(merged)
    assert len(notes) == 1
    assert notes[0].startswith("d = 2")
    assert "dgm < nitsche" in notes[0] and "nitsche < dgm" in notes[0]

    markdown = tmp_path / "merged.md"
    write_report([nitsche, dgm], str(tmp_path / "merged.csv"), str(markdown))
    assert markdown.read_text(encoding="utf-8").splitlines()[-1] == f"- {notes[0]}"


def test_matching_ordering_has_no_notes(tmp_path):
    nitsche = _run_dir(tmp_path, "a", "nitsche", [2], 1.01)
    dgm = _run_dir(tmp_path, "b", "dgm", [2], 1.1)
    assert ordering_notes(merge_reports([nitsche, dgm])) == []

import numpy as np
import pytest

from toxscreen.evaluate import EvalReport, ReportEntry
from toxscreen.report import (write_eval_report, write_importance,
                              write_reliability)


def two_member_report():
    entries = [
        ReportEntry("random", 0, "gbm-pld", "T1", "test", 0.82),
        ReportEntry("random", 0, "mlp-fp", "T1", "test", 0.78),
        ReportEntry("random", 1, "gbm-pld", "T1", "test", 0.84),
        ReportEntry("random", 1, "mlp-fp", "T1", "test", 0.80),
    ]
    corr = np.array([[1.0, 0.6], [0.6, 1.0]])
    return EvalReport(entries, ["T1"], ["gbm-pld", "mlp-fp"], corr)


def test_eval_report_files(tmp_path):
    written = write_eval_report(tmp_path, two_member_report(), checksum="abc")
    names = {p.name for p in written}
    assert names == {"report.tsv", "correlation.png", "summary.png"}
    text = (tmp_path / "report.tsv").read_text()
    assert text.startswith("# config-checksum abc\n# eval-report v1\n")
    for p in written:
        assert p.stat().st_size > 0
    png = (tmp_path / "summary.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_eval_report_single_member_skips_correlation(tmp_path):
    report = two_member_report()
    report.member_names = ["gbm-pld"]
    report.entries = [e for e in report.entries if e.model == "gbm-pld"]
    report.correlation = np.array([[1.0]])
    written = write_eval_report(tmp_path, report)
    assert {p.name for p in written} == {"report.tsv", "summary.png"}


def test_eval_report_tsv_is_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    write_eval_report(a, two_member_report(), checksum="abc")
    write_eval_report(b, two_member_report(), checksum="abc")
    assert (a / "report.tsv").read_bytes() == (b / "report.tsv").read_bytes()
    assert (a / "summary.png").read_bytes() == (b / "summary.png").read_bytes()


def test_importance_sorted_and_rendered(tmp_path):
    names = [f"f{i}" for i in range(5)]
    gains = np.array([0.1, 0.4, 0.05, 0.3, 0.15])
    paths = write_importance(tmp_path, names, gains, checksum="xyz", top=3)
    lines = (tmp_path / "importance.tsv").read_text().splitlines()
    assert lines[0] == "# config-checksum xyz"
    assert lines[1] == "feature\tgain"
    assert lines[2] == "f1\t0.400000"
    assert lines[3] == "f3\t0.300000"
    assert (tmp_path / "importance.png").stat().st_size > 0
    assert len(paths) == 2


def test_reliability_files(tmp_path):
    rel = [{"threshold": 0.0, "mean_auc": 0.85, "count": 50,
            "targets_skipped": 0},
           {"threshold": 0.5, "mean_auc": None, "count": 0,
            "targets_skipped": 3}]
    cplx = [{"lo": 0.0, "hi": 20.0, "mean_auc": 0.8, "count": 25,
             "targets_skipped": 0},
            {"lo": 20.0, "hi": 40.0, "mean_auc": 0.75, "count": 25,
             "targets_skipped": 0}]
    paths = write_reliability(tmp_path, rel, cplx, checksum="c0ffee")
    assert {p.name for p in paths} == {"reliability.tsv", "complexity.tsv",
                                       "reliability.png"}
    lines = (tmp_path / "reliability.tsv").read_text().splitlines()
    assert lines[0] == "# config-checksum c0ffee"
    assert lines[1].split("\t")[0] == "threshold"
    assert "NA" in lines[3]
    clines = (tmp_path / "complexity.tsv").read_text().splitlines()
    assert clines[2].startswith("0.000000\t20.000000\t0.800000")

import subprocess
import sys
from pathlib import Path

import pytest

from arealaw_plots import (SweepError, SweepTable, build_area_figure,
                           plot_area_scaling, plot_convergence,
                           plot_sie_histogram)
from arealaw_plots.__main__ import main

EXAMPLES = Path(__file__).resolve().parents[1] / "examples"
AREA = EXAMPLES / "area_sweep.csv"
HARVEST = EXAMPLES / "harvest_sweep.csv"
SIE = EXAMPLES / "sie_sweep.csv"


def test_shipped_examples_exist():
    for p in (AREA, HARVEST, SIE):
        assert p.exists(), p


def test_read_table():
    t = SweepTable.read(AREA)
    assert "I_bits" in t.columns
    assert len(t.rows) >= 4
    assert isinstance(t.rows[0]["I_bits"], float)


def test_area_figure_renders(tmp_path):
    out = plot_area_scaling(AREA, tmp_path / "area.svg")
    assert out.exists() and out.stat().st_size > 0


def test_area_bound_line_matches_csv_exactly():
    # acceptance: bound-line endpoints equal the bound_bits column values
    table = SweepTable.read(AREA)
    fig = build_area_figure(table)
    groups = table.groups("N", "X")
    for ax, (key, rows) in zip(fig.axes, sorted(groups.items())):
        rows = sorted(rows, key=lambda r: r["T_tot"])
        (line,) = [l for l in ax.get_lines()]
        ydata = list(line.get_ydata())
        assert ydata[0] == rows[0]["bound_bits"]
        assert ydata[-1] == rows[-1]["bound_bits"]
        assert ydata == [r["bound_bits"] for r in rows]
    print("[PASS] plot_component: bound-line endpoints equal CSV bound_bits exactly")


def test_convergence_figure_renders(tmp_path):
    out = plot_convergence(HARVEST, tmp_path / "conv.svg")
    assert out.exists() and out.stat().st_size > 0


def test_convergence_monotone_trend():
    table = SweepTable.read(HARVEST)
    rows = sorted(table.rows, key=lambda r: r["m"])
    errs = [r["trotter_error"] for r in rows]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))


def test_convergence_single_m_warns(tmp_path):
    table = SweepTable.read(HARVEST)
    single = tmp_path / "single.csv"
    lines = HARVEST.read_text().strip().split("\n")
    single.write_text("\n".join(lines[:2]) + "\n")
    with pytest.warns(UserWarning, match="single-m"):
        plot_convergence(single, tmp_path / "single.svg")
    assert (tmp_path / "single.svg").exists()


def test_sie_figure_renders(tmp_path):
    out = plot_sie_histogram(SIE, tmp_path / "sie.svg")
    assert out.exists() and out.stat().st_size > 0


def test_empty_csv_clean_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SweepError, match="empty"):
        plot_area_scaling(empty, tmp_path / "nope.svg")
    assert not (tmp_path / "nope.svg").exists()


def test_header_only_csv_clean_error(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text(AREA.read_text().split("\n")[0] + "\n")
    with pytest.raises(SweepError, match="no data rows"):
        plot_area_scaling(p, tmp_path / "nope.svg")


def test_missing_columns_error(tmp_path):
    p = tmp_path / "cols.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SweepError, match="missing required columns"):
        plot_area_scaling(p, tmp_path / "nope.svg")
    with pytest.raises(SweepError, match="missing"):
        plot_convergence(p, tmp_path / "nope.svg")


def test_malformed_numeric_strict(tmp_path):
    p = tmp_path / "bad.csv"
    lines = AREA.read_text().strip().split("\n")
    fields = lines[1].split(",")
    fields[11] = "oops"  # I_bits
    p.write_text(lines[0] + "\n" + ",".join(fields) + "\n")
    with pytest.raises(SweepError, match="non-numeric"):
        plot_area_scaling(p, tmp_path / "nope.svg")


def test_cli_main(tmp_path):
    assert main([str(AREA), "--kind", "area", "--out", str(tmp_path / "a.svg")]) == 0
    assert main([str(HARVEST), "--kind", "convergence", "--out", str(tmp_path / "c.svg")]) == 0
    assert main([str(SIE), "--kind", "sie", "--out", str(tmp_path / "s.svg")]) == 0
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert main([str(empty), "--kind", "area", "--out", str(tmp_path / "x.svg")]) == 1


def test_module_invocation(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "arealaw_plots", str(AREA), "--kind", "area",
         "--out", str(tmp_path / "fig.svg")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "fig.svg").exists()

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

import pytest

from horient import cli
from horient.cli import (
    EXIT_ERROR,
    EXIT_INCONCLUSIVE,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    Analysis,
    UsageError,
    main,
    result_to_json,
)
from horient.orientability import InvarianceReport


S_STAR = (1.0 - 2 * 0.2 - math.sqrt(1.0 - 4 * 0.2)) / 2


def _run(capsys: pytest.CaptureFixture[str], *argv: str) -> tuple[int, str, str]:
    status = main(list(argv))
    captured = capsys.readouterr()
    return status, captured.out, captured.err


def _analyze(capsys: pytest.CaptureFixture[str], *argv: str) -> tuple[int, dict]:
    status, out, _ = _run(capsys, "analyze", *argv)
    return status, json.loads(out)


def test_analyze_finds_mobius_characteristic_point(capsys):
    """The narrow strip has one characteristic point at (½ − √(¼ − R), 0, 0)."""
    status, doc = _analyze(capsys, "--surface", "mobius", "--R", "0.2", "--w", "0.1",
                           "--modes", "characteristic")
    assert status == EXIT_OK
    assert doc["surface"] == "mobius"
    assert doc["parameters"] == {"R": 0.2, "w": 0.1}
    (point,) = doc["characteristic_points"]
    assert set(point) == {"r", "s", "x", "y", "t", "residual", "refined"}
    assert abs(point["r"]) <= 1e-8
    assert point["s"] == pytest.approx(S_STAR, abs=1e-8)
    assert point["x"] == pytest.approx(0.5 - math.sqrt(0.25 - 0.2), abs=1e-8)
    assert point["y"] == pytest.approx(0.0, abs=1e-8)
    assert point["t"] == pytest.approx(0.0, abs=1e-8)
    assert point["refined"] is True
    assert doc["orientability"] == []
    assert "invariance" not in doc
    assert doc["timings_ms"] == {}


def test_analyze_wide_strip_is_not_orientable(capsys):
    """R = 0.5 has no characteristic points and flips across the seam."""
    status, doc = _analyze(capsys, "--surface", "mobius", "--R", "0.5", "--w", "0.2",
                           "--modes", "orientability-heisenberg")
    assert status == EXIT_OK
    assert doc["characteristic_points"] == []
    (report,) = doc["orientability"]
    assert report["mode"] == "Heisenberg"
    assert report["verdict"] == "NonOrientable"
    assert report["seam_mismatch"] <= -0.99
    assert report["min_normal_norm"] > 1e-8


def test_analyze_plane_x(capsys):
    """{x = 0} has no characteristic points and is orientable."""
    status, doc = _analyze(capsys, "--surface", "plane-x", "--c", "0",
                           "--modes", "characteristic,orientability-heisenberg")
    assert status == EXIT_OK
    assert doc["parameters"] == {"c": 0.0}
    assert doc["characteristic_points"] == []
    assert doc["orientability"] == [{
        "mode": "Heisenberg",
        "verdict": "Orientable",
        "seam_mismatch": None,
        "min_normal_norm": 1.0,
    }]


def test_inconclusive_exit_status(capsys):
    """A characteristic point left in place makes the verdict inconclusive."""
    status, doc = _analyze(capsys, "--surface", "mobius", "--R", "0.2", "--w", "0.1",
                           "--modes", "orientability-euclidean,orientability-heisenberg")
    assert status == EXIT_INCONCLUSIVE
    assert [r["verdict"] for r in doc["orientability"]] == ["Inconclusive", "Inconclusive"]
    assert [r["mode"] for r in doc["orientability"]] == ["Euclidean", "Heisenberg"]


def test_excision_from_command_line(capsys):
    """--excise-radius cuts out the characteristic disk."""
    status, doc = _analyze(capsys, "--surface", "mobius", "--R", "0.2", "--w", "0.1",
                           "--modes", "orientability-heisenberg", "--excise-radius", "0.05")
    assert status == EXIT_OK
    assert doc["orientability"][0]["verdict"] == "NonOrientable"


def _reject_constant(token: str) -> float:
    raise ValueError(f"non-standard JSON constant {token}")


def test_fully_excised_report_is_strict_json(capsys):
    """A run with nothing left to sample reports null, never NaN."""
    status, out, _ = _run(capsys, "analyze", "--surface", "mobius", "--R", "0.2", "--w", "0.1",
                          "--grid", "32x16", "--modes", "orientability-heisenberg",
                          "--excise-radius", "100")
    assert status == EXIT_INCONCLUSIVE
    assert "NaN" not in out
    doc = json.loads(out, parse_constant=_reject_constant)
    (entry,) = doc["orientability"]
    assert entry["verdict"] == "Inconclusive"
    assert entry["min_normal_norm"] is None
    assert entry["seam_mismatch"] is None


def test_invariance_from_command_line(capsys):
    """One audit per requested automorphism, translation first."""
    status, doc = _analyze(capsys, "--surface", "mobius", "--R", "0.2", "--w", "0.1",
                           "--modes", "invariance", "--translate", "0.3,-0.7,1.1",
                           "--dilate", "2")
    assert status == EXIT_OK
    audits = doc["invariance"]
    assert [a["automorphism"] for a in audits] == ["translate(0.3,-0.7,1.1)", "dilate(2.0)"]
    for audit in audits:
        assert audit["ok"] is True
        assert audit["failures"] == []
        assert len(audit["original"]) == len(audit["transformed"]) == 1
        assert audit["verdicts"]["Heisenberg"] == ["Inconclusive", "Inconclusive"]
    assert doc["characteristic_points"] == []


def test_failed_invariance_exit_status(capsys, monkeypatch):
    """A failed audit is exit status 1."""

    def broken(*args: object, **kwargs: object) -> InvarianceReport:
        return InvarianceReport("dilate(2.0)", (), (), 0.0, 0.0, {}, ("verdict changed",))

    monkeypatch.setattr(cli, "invariance_audit", broken)
    status, doc = _analyze(capsys, "--surface", "mobius", "--R", "0.5", "--w", "0.2",
                           "--modes", "invariance", "--dilate", "2")
    assert status == EXIT_ERROR
    assert doc["invariance"][0]["failures"] == ["verdict changed"]


def test_timings_on_request(capsys):
    """timings_ms is filled per stage only with --timings."""
    _, doc = _analyze(capsys, "--surface", "plane-x", "--modes", "characteristic",
                      "--grid", "32x32", "--timings")
    assert list(doc["timings_ms"]) == ["characteristic"]
    assert doc["timings_ms"]["characteristic"] >= 0.0


def test_json_round_trip(capsys):
    """Parsing and re-serialising the report reproduces it exactly."""
    status, out, _ = _run(capsys, "analyze", "--surface", "mobius", "--R", "0.2", "--w", "0.1",
                          "--grid", "360x80")
    assert status == EXIT_OK
    assert json.dumps(json.loads(out), indent=2) + "\n" == out


def test_result_to_json_matches_run():
    """Level-set characteristic points carry no parameters."""
    cfg = Analysis.Config(surface="plane-t", grid=(32, 32))
    doc = result_to_json(cfg.make().run())
    assert doc["surface"] == "plane-t"
    assert len(doc["characteristic_points"]) == 1
    point = doc["characteristic_points"][0]
    assert point["r"] is None and point["s"] is None
    assert abs(point["x"]) <= 1e-8 and abs(point["y"]) <= 1e-8


def test_text_output(capsys):
    """--output text pretty-prints the result."""
    status, out, _ = _run(capsys, "analyze", "--surface", "plane-x", "--grid", "32x32",
                          "--output", "text")
    assert status == EXIT_OK
    assert out.startswith("AnalysisResult(")


def test_export_rows(tmp_path):
    """A 72×16 grid gives 1152 rows, and N3 vanishes on r = π."""
    path = tmp_path / "strip.csv"
    status = main(["export", "--surface", "mobius", "--R", "0.5", "--w", "0.2",
                   "--grid", "72x16", "--out", str(path)])
    assert status == EXIT_OK
    rows = list(csv.reader(io.StringIO(path.read_text(encoding="utf-8"))))
    assert rows[0] == ["r", "s", "x", "y", "t", "N1", "N2", "N3", "nE1", "nE2", "nE3"]
    data = np.array(rows[1:], dtype=np.float64)
    assert data.shape == (1152, 11)
    # row-major: r outer, s inner
    np.testing.assert_array_equal(data[:16, 0], 0.0)
    assert data[16, 0] > 0.0
    on_pi = np.abs(data[:, 0] - math.pi) <= 1e-12
    assert on_pi.sum() == 16
    assert np.max(np.abs(data[on_pi, 7])) <= 1e-12


def test_export_is_deterministic(tmp_path):
    """Identical configs write identical bytes."""
    args = ["export", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--grid", "72x16"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main([*args, "--out", str(first)]) == EXIT_OK
    assert main([*args, "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_analyze_is_deterministic(capsys):
    """Identical configs print identical reports."""
    args = ("analyze", "--surface", "mobius", "--R", "0.2", "--w", "0.1", "--grid", "360x80",
            "--modes", "characteristic,orientability-heisenberg", "--excise-radius", "0.05")
    _, first, _ = _run(capsys, *args)
    _, second, _ = _run(capsys, *args)
    assert first == second


def test_poly_surface(tmp_path, capsys):
    """A polynomial file {t = 0} has its characteristic point at the origin."""
    path = tmp_path / "t.txt"
    path.write_text("# the plane t = 0\n1 0 0 1\n", encoding="utf-8")
    status, doc = _analyze(capsys, "--surface", "poly", "--poly", str(path), "--grid", "32x32")
    assert status == EXIT_OK
    (point,) = doc["characteristic_points"]
    assert max(abs(point["x"]), abs(point["y"]), abs(point["t"])) <= 1e-8


def test_malformed_polynomial_exit_status(tmp_path, capsys):
    """Parse errors name the file and the line and exit with 1."""
    path = tmp_path / "bad.txt"
    path.write_text("1 0 0 1\n1 2 0\n", encoding="utf-8")
    status, _, err = _run(capsys, "analyze", "--surface", "poly", "--poly", str(path))
    assert status == EXIT_ERROR
    assert f"{path}: line 2: " in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["analyze"],
        ["analyze", "--surface", "torus"],
        ["analyze", "--surface", "mobius", "--R", "0.5"],
        ["analyze", "--surface", "poly"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--grid", "8x8"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--grid", "720"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--tol", "0.1"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--char-tol", "0"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--modes", "curvature"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--modes", "invariance"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--dilate", "-1"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--grid", "32x16",
         "--modes", "invariance", "--translate", "1,2"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--grid", "32x16",
         "--modes", "invariance", "--translate", "1,2,3,4,5"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.2", "--grid", "32x16",
         "--modes", "invariance", "--translate", "nan,0,0"],
        ["analyze", "--surface", "mobius", "--R", "x", "--w", "0.2"],
        ["analyze", "--surface", "mobius", "--R", "0.5", "--w", "0.5"],
        ["export", "--surface", "plane-t", "--grid", "32x32", "--modes", "characteristic"],
    ],
)
def test_usage_errors(argv: list[str], capsys):
    """Bad command lines and configurations exit with 64."""
    status, out, err = _run(capsys, *argv)
    assert status == EXIT_USAGE
    assert out == ""
    assert err.startswith("horient: error: ")


def test_level_set_only_surfaces_need_a_patch(tmp_path, capsys):
    """Export and invariance audits are refused for polynomial level sets."""
    path = tmp_path / "g.txt"
    path.write_text("1 1 0 0\n", encoding="utf-8")
    for argv in (
        ["export", "--surface", "poly", "--poly", str(path)],
        ["analyze", "--surface", "poly", "--poly", str(path), "--grid", "32x32",
         "--modes", "invariance", "--dilate", "2"],
    ):
        status, out, err = _run(capsys, *argv)
        assert status == EXIT_USAGE
        assert out == ""
        assert "needs a parametrised patch" in err


def test_io_errors(tmp_path, capsys):
    """Unreadable inputs and unwritable outputs exit with 74."""
    status, _, _ = _run(capsys, "analyze", "--surface", "poly", "--poly",
                        str(tmp_path / "missing.txt"))
    assert status == EXIT_IO
    status, _, _ = _run(capsys, "export", "--surface", "mobius", "--R", "0.5", "--w", "0.2",
                        "--grid", "72x16", "--out", str(tmp_path / "no" / "such" / "dir.csv"))
    assert status == EXIT_IO


def test_help_exits_cleanly(capsys):
    """--help prints usage and returns 0."""
    status, out, _ = _run(capsys, "--help")
    assert status == EXIT_OK
    assert "analyze" in out


def test_config_errors_are_usage_errors():
    """Invalid configs raise UsageError from finalize."""
    with pytest.raises(UsageError, match="unknown surface"):
        Analysis.Config(surface="sphere").finalize()
    with pytest.raises(UsageError, match="grid must be at least"):
        Analysis.Config(surface="plane-x", grid=(4, 4)).finalize()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

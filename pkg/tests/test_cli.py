import json
from unittest.mock import patch

import pytest

from app.main import main
from app.models.measure import Partition
from app.schemas.results import GraphonWeakResult


@pytest.fixture
def sign_csv(tmp_path):
    path = tmp_path / "sign.csv"
    path.write_text("1,-1\n-1,1\n", encoding="utf-8")
    return path


def read_report(path):
    return json.loads(path.read_text(encoding="utf-8"))


# ----------------------------------------------------------------
# TEST 1: WEAK REGULARITY END TO END
# ----------------------------------------------------------------
def test_weak_run(tmp_path, sign_csv):
    out = tmp_path / "weak.json"

    code = main(["graphon-weak", "--input", str(sign_csv), "--eps", "0.2", "--output", str(out)])

    assert code == 0
    report = read_report(out)
    assert report["operation"] == "graphon-weak"
    assert report["passed"] is True
    assert report["certificates"]["steps"] == 1
    assert report["outputs"]["R"] == [[0], [1]]
    assert "total_seconds" in report["timings"]


def test_report_goes_to_stdout(sign_csv, capsys):
    code = main(["norm", "--input", str(sign_csv), "--semiring", "rectangles", "--stable-output"])

    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["outputs"]["value"] == pytest.approx(0.25)
    assert "timings" not in report


# ----------------------------------------------------------------
# TEST 2: BOUNDS
# ----------------------------------------------------------------
def test_bounds_run(tmp_path):
    out = tmp_path / "bounds.json"

    code = main(["bounds", "--k", "1", "--ell", "2", "--sigma", "1", "--p", "2", "--growth", "succ", "--output", str(out)])

    assert code == 0
    bounds = read_report(out)["outputs"]["bounds"]
    assert bounds["reg"] == "8"
    assert bounds["h_table"] == ["0", "8"]


def test_overflowing_bounds_still_succeed(tmp_path):
    out = tmp_path / "bounds.json"

    code = main(["bounds", "--k", "1", "--sigma", "1", "--p", "3/2", "--prime", "--output", str(out)])

    assert code == 0
    report = read_report(out)
    assert report["certificates"]["overflowed"] is True
    assert report["outputs"]["bounds"]["reg_prime"] is None


# ----------------------------------------------------------------
# TEST 3: STABLE OUTPUT & VERIFY
# ----------------------------------------------------------------
def test_stable_output_is_byte_identical(tmp_path, sign_csv):
    out = tmp_path / "decompose.json"
    argv = ["decompose", "--input", str(sign_csv), "--sigma", "0.25", "--stable-output", "--output", str(out)]

    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first


def test_verify_recomputes_a_report(tmp_path, sign_csv):
    report_path = tmp_path / "decompose.json"
    assert main(["decompose", "--input", str(sign_csv), "--sigma", "0.25", "--output", str(report_path)]) == 0

    out = tmp_path / "verify.json"
    code = main(["verify", "--input", str(sign_csv), "--report", str(report_path), "--output", str(out)])

    assert code == 0
    verdict = read_report(out)
    assert verdict["outputs"]["verified_operation"] == "decompose"
    assert verdict["certificates"]["passed"] is True
    assert all(verdict["certificates"]["checks"].values())


def test_hypercube_run(tmp_path):
    cube = tmp_path / "cube.json"
    cube.write_text(json.dumps({"alphabet": ["a", "b", "c"], "n": 1, "subset": ["c"]}), encoding="utf-8")
    out = tmp_path / "hypercube.json"

    assert main(["hypercube", "--input", str(cube), "--eps", "0.6", "--output", str(out)]) == 0
    assert read_report(out)["passed"] is True


# ----------------------------------------------------------------
# TEST 4: EXIT CODES
# ----------------------------------------------------------------
def test_bad_growth_spec_exits_2(sign_csv, capsys):
    code = main(["decompose", "--input", str(sign_csv), "--sigma", "0.25", "--growth", "banana"])

    assert code == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"]["code"] == "CONFIG_ERROR"


def test_missing_parameter_exits_2(sign_csv):
    assert main(["uniform", "--input", str(sign_csv)]) == 2
    assert main(["decompose", "--input", str(sign_csv), "--sigma", "1.5"]) == 2


def test_unknown_operation_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["triangulate"])
    assert info.value.code == 2


def test_missing_file_exits_5(tmp_path):
    assert main(["graphon-weak", "--input", str(tmp_path / "missing.csv"), "--eps", "0.2"]) == 5


def test_asymmetric_graphon_exits_5(tmp_path):
    path = tmp_path / "asym.csv"
    path.write_text("0,1\n2,0\n", encoding="utf-8")

    assert main(["graphon-weak", "--input", str(path), "--eps", "0.2"]) == 5


# ----------------------------------------------------------------
# TEST 5: FAILURES FROM INSIDE A RUN
# ----------------------------------------------------------------
@patch("app.api.endpoints.graphon.graphon_weak_regularity")
def test_failed_certificates_exit_4(mock_weak, tmp_path, sign_csv):
    mock_weak.return_value = GraphonWeakResult(
        R=Partition.trivial(2), steps=0, step_bound=1, final_cut_norm=0.25, passed=False,
    )
    out = tmp_path / "weak.json"

    code = main(["graphon-weak", "--input", str(sign_csv), "--eps", "0.2", "--output", str(out)])

    assert code == 4
    mock_weak.assert_called_once()
    # The failing report is still written
    assert read_report(out)["passed"] is False


@patch("app.main.run", side_effect=RuntimeError("boom"))
def test_unexpected_errors_exit_4(mock_run, sign_csv):
    assert main(["graphon-weak", "--input", str(sign_csv), "--eps", "0.2"]) == 4
    mock_run.assert_called_once()

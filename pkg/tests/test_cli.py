import json
import subprocess
import sys

import pytest

from filterbounds.cli import EXIT_OK, EXIT_PARSE, EXIT_UNBOUNDED, main


@pytest.fixture
def src(tmp_path):
    def write(text, name="net.flt"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def test_json_report(networks_dir, capsys):
    assert main(["analyze", str(networks_dir / "filter1.flt"), "--report", "json"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["format"] == "ieee32"
    assert float(data["outputs"][0]["bound"]["dec"]) <= 345


def test_text_report_and_no_share(networks_dir, capsys):
    main(["analyze", str(networks_dir / "filter1.flt")])
    fine = capsys.readouterr().out
    main(["analyze", str(networks_dir / "filter1.flt"), "--no-share"])
    coarse = capsys.readouterr().out
    assert "output x: |x| <=" in fine
    assert fine != coarse


def test_format_override(networks_dir, capsys):
    main(["analyze", str(networks_dir / "filter1.flt"), "--format", "fixed:1/1024:rne",
          "--report", "json"])
    assert json.loads(capsys.readouterr().out)["format"] == "fixed:1/1024:rne"


def test_parse_error_exit_code(src, capsys):
    code = main(["analyze", src("input e;\nx = e +;\noutput x;")])
    assert code == EXIT_PARSE
    assert ":2:" in capsys.readouterr().err


def test_strict_unbounded(src):
    path = src("input e <= 1; x = e + delay(x, 1); output x;")
    assert main(["analyze", path]) == EXIT_OK
    assert main(["analyze", path, "--strict"]) == EXIT_UNBOUNDED


def test_check_flag(networks_dir, capsys):
    code = main(["analyze", str(networks_dir / "tf2.flt"), "--check", "--steps", "500",
                 "--seed", "2"])
    assert code == EXIT_OK
    assert "check o: observed" in capsys.readouterr().err


def test_console_entry_point(networks_dir):
    out = subprocess.run([sys.executable, "-m", "filterbounds.cli", "analyze",
                          str(networks_dir / "tf2.flt"), "--dev-max", "512"],
                         capture_output=True, text=True, check=True)
    assert "bounded" in out.stdout


def test_check_violation_exit_code(networks_dir, monkeypatch, capsys):
    import filterbounds.cli as cli
    from filterbounds.frontend import Report

    real = cli.analyze

    def lowered(net, opts):
        r = real(net, opts)
        data = r.data
        data["outputs"][0]["bound"] = {"dec": "0.5", "hex": (0.5).hex()}
        return Report(data)

    monkeypatch.setattr(cli, "analyze", lowered)
    code = main(["analyze", str(networks_dir / "tf2.flt"), "--check", "--steps", "200"])
    assert code == cli.EXIT_VIOLATION
    assert "VIOLATION o" in capsys.readouterr().err

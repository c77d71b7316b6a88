import csv
from fractions import Fraction

import pytest

from brusselator_cap import cli
from brusselator_cap import verifier as vf


class TestNumbers:
    @pytest.mark.parametrize("text, value", [
        ("0x1.8p+1", Fraction(3)),
        ("0.125", Fraction(1, 8)),
        ("17/2", Fraction(17, 2)),
        ("2^-11", Fraction(1, 2048)),
        ("3*2^-10", Fraction(3, 1024)),
        ("-2^3", Fraction(-8)),
    ])
    def test_parse_exact(self, text, value):
        assert cli.parse_exact(text) == value

    @pytest.mark.parametrize("text", ["", "abc", "1/0", "2^x"])
    def test_bad_numbers(self, text):
        with pytest.raises(cli.UsageError):
            cli.parse_exact(text)

    def test_r_grid(self):
        assert cli.r_grid_from([-4, -8, 2]) == (2.0**-4, 2.0**-6, 2.0**-8)


class TestPresets:
    def test_every_preset_builds_jobs(self):
        for name in cli.load_presets():
            jobs = cli.preset_jobs(name)
            assert jobs and all(j.box.lo <= j.box.hi for j in jobs)

    def test_desk_boxes_are_adjacent(self):
        jobs = cli.preset_jobs("desk", "stationary")
        assert [float(j.box.lo) for j in jobs] == [3.875, 4.125]
        assert jobs[0].box.hi == jobs[1].box.lo

    def test_desk_periodic_is_reduced(self):
        (job,) = cli.preset_jobs("desk", "periodic")
        assert job.N <= 15 and job.K <= 8

    def test_unknown_preset(self):
        assert cli.main(["run", "--preset", "nope"]) == cli.EXIT_USAGE


class TestExitCodes:
    def test_missing_certificate_is_io(self, tmp_path):
        assert cli.main(["verify", "--cert", str(tmp_path / "none.cert")]) == cli.EXIT_IO

    def test_garbage_certificate_is_io(self, tmp_path):
        (tmp_path / "bad.cert").write_text("hello\n")
        assert cli.main(["verify", "--cert", str(tmp_path / "bad.cert")]) == cli.EXIT_IO

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["prove-stationary", "--cuts"])
        assert e.value.code == cli.EXIT_USAGE

    def test_glue_needs_two(self, tmp_path):
        assert cli.main(["glue", "--certs", "a.cert"]) == cli.EXIT_USAGE

    def test_bad_cuts(self, tmp_path):
        cli.main(["find-stationary", "--b-center", "1", "--taylor-degree", "2", "--spatial-cut", "7",
                  "-o", str(tmp_path / "b.branch")])
        code = cli.main(["prove-stationary", "--branch-file", str(tmp_path / "b.branch"), "--cuts", "1,2,3"])
        assert code == cli.EXIT_USAGE


class TestPipeline:
    def test_prove_glue_verify(self, tmp_path, capsys):
        d = tmp_path / "certs"
        assert cli.main(["prove-stationary", "--preset", "desk", "-o", str(d)]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert out.count("ACCEPTED") == 2
        a, b = str(d / "stationary0.cert"), str(d / "stationary1.cert")
        assert cli.main(["glue", "--certs", f"{a},{b}"]) == cli.EXIT_OK
        assert cli.main(["glue", "--certs", f"{b},{a}"]) == cli.EXIT_REJECTED
        for c in (a, b):
            assert cli.main(["verify", "--cert", c]) == cli.EXIT_OK
        assert "VERIFIED" in capsys.readouterr().out

    def test_branch_file_route(self, tmp_path):
        br = tmp_path / "s.branch"
        assert cli.main(["find-stationary", "--b-center", "4", "--b-halfwidth", "2^-3", "-o", str(br)]) == 0
        cert = tmp_path / "s.cert"
        assert cli.main(["prove-stationary", "--branch-file", str(br), "--cuts", "48,0,96,0,32,0",
                         "-o", str(cert)]) == cli.EXIT_OK
        assert vf.Certificate.load(cert).accepted
        snap = tmp_path / "snap.csv"
        assert cli.main(["snapshot", "--cert", str(cert), "--nx", "9", "-o", str(snap)]) == 0
        rows = list(csv.reader(open(snap)))
        assert rows[0] == ["t", "x", "U", "V"] and len(rows) == 10

    def test_eigen_scan_with_gnuplot(self, tmp_path, capsys):
        out = tmp_path / "eig.csv"
        assert cli.main(["eigen-scan", "2.5", "2.9", "--steps", "8", "--spatial-cut", "16",
                         "-o", str(out), "--emit-gnuplot"]) == 0
        assert out.with_suffix(".gp").exists()
        assert "sign changes at 2.6" in capsys.readouterr().out

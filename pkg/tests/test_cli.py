import io
import re
import shutil
import subprocess
import sys

import numpy as np
import pytest

from jetmech.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from jetmech.systemfile import SystemFileError, parse_system
from conftest import FIXTURES, SYSTEMS

MALFORMED = sorted((FIXTURES / "malformed").glob("*.ini"))


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def sections_of(path):
    return re.findall(r"^\[([^\]]+)\]", path.read_text(), re.M)


class TestCommands:
    def test_derive_lagrange_operator(self):
        code, out, _ = run("derive", "--system", SYSTEMS / "oscillator.ini", "--lagrange")
        assert code == EXIT_OK
        assert "E1 = -q1 - qtt1" in out
        assert "qtt1 = -q1" in out

    def test_derive_hamilton(self):
        code, out, _ = run("derive", "--system", SYSTEMS / "oscillator.ini", "--hamilton")
        assert code == EXIT_OK and "qt1 = p1" in out and "pt1 = -q1" in out

    def test_noether_translation(self):
        code, out, _ = run("noether", "--system", SYSTEMS / "free_particle.ini", "--symmetry", "translation")
        assert code == EXIT_OK
        m = re.fullmatch(r"translation: symmetry: yes; current qt1; max drift (\S+)\n", out)
        assert m and float(m.group(1)) <= 1e-6

    def test_noether_flags_broken_symmetry(self):
        code, out, _ = run("noether", "--system", SYSTEMS / "free_particle.ini", "--symmetry", "dilation")
        assert code == EXIT_OK and "symmetry: no" in out
        assert float(out.rsplit(" ", 1)[1]) > 1e-2

    def test_simulate_hamilton_energy_monitor(self, tmp_path):
        code, out, _ = run("simulate", "--system", SYSTEMS / "oscillator.ini", "--hamilton", "--out", tmp_path)
        assert code == EXIT_OK
        data = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True)
        assert data.dtype.names == ("t", "q1", "p1", "energy")
        assert np.max(np.abs(data["energy"] - data["energy"][0])) <= 1e-6
        assert abs(data["t"][-1] - 2 * np.pi) < 1e-12

    def test_simulate_stdout_and_overrides(self):
        code, out, _ = run("simulate", "--system", SYSTEMS / "free_particle.ini", "--t1", "0.5", "--dt", "0.1")
        lines = out.splitlines()
        assert code == EXIT_OK and lines[0] == "t,q1,qt1" and len(lines) == 7
        assert float(lines[-1].split(",")[1]) == pytest.approx(1.0, abs=1e-15)

    def test_simulate_deterministic(self, tmp_path):
        for d in ("a", "b"):
            assert run("simulate", "--system", SYSTEMS / "rotating.ini", "--out", tmp_path / d)[0] == EXIT_OK
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()

    def test_legendre_report(self):
        code, out, _ = run("legendre", "--system", SYSTEMS / "exp_kinetic.ini")
        assert code == EXIT_OK
        assert "associated hamiltonian: 1/2*exp(t)^(-1)*p1^2" in out
        gap = float(re.search(r"trajectory gap: (\S+)", out).group(1))
        assert gap <= 1e-6

    def test_legendre_requires_hyperregular(self):
        code, _, err = run("legendre", "--system", FIXTURES / "degenerate.ini")
        assert code == EXIT_VALIDATION and err.count("\n") == 1 and "[lagrangian]" in err

    def test_frame_report(self):
        code, out, _ = run("frame", "--system", SYSTEMS / "rotating.ini", "--frame", "rotating", "--transform", "rot")
        assert code == EXIT_OK
        assert "G1 = -7/10*q2, G2 = 7/10*q1" in out
        assert "free motion" in out and "energy function E_G" in out

    def test_quantum_report(self, tmp_path):
        code, out, _ = run("quantum", "--system", SYSTEMS / "free_packet.ini", "--out", tmp_path, "--t1", "0.1")
        assert code == EXIT_OK
        orders = [float(x) for x in re.findall(r"order ([\d.]+), ([\d.]+)", out)[0]]
        assert all(1.8 < o < 2.2 for o in orders)
        for name in ("observables.csv", "snapshot_initial.csv", "snapshot_final.csv"):
            assert (tmp_path / name).is_file()
        header = (tmp_path / "observables.csv").read_text().splitlines()[0]
        assert header == "t,norm,re_position,im_position,re_momentum,im_momentum"


class TestValidation:
    @pytest.mark.parametrize("path", MALFORMED, ids=lambda p: p.stem)
    def test_malformed_rejected(self, path):
        code, out, err = run("simulate", "--system", path)
        assert code == EXIT_VALIDATION
        assert err.count("\n") == 1 and err.startswith("jetmech: error: [")
        named = err.split("[", 1)[1].split("]", 1)[0]
        sections = sections_of(path)
        assert named in sections + ["file", "system"]
        if path.stem not in ("missing_dimension", "not_ini"):
            assert named != "system" and named in sections

    @pytest.mark.parametrize("path", MALFORMED, ids=lambda p: p.stem)
    def test_parse_system_raises(self, path):
        with pytest.raises(SystemFileError):
            parse_system(path.read_text())

    def test_ambiguous_description(self):
        code, _, err = run("simulate", "--system", FIXTURES / "ambiguous.ini")
        assert code == EXIT_VALIDATION and "--lagrange" in err
        assert run("simulate", "--system", FIXTURES / "ambiguous.ini", "--lagrange")[0] == EXIT_OK

    def test_missing_file(self, tmp_path):
        code, _, err = run("derive", "--system", tmp_path / "nope.ini")
        assert code == EXIT_VALIDATION and "[file]" in err

    def test_missing_section_for_command(self):
        code, _, err = run("quantum", "--system", SYSTEMS / "free_particle.ini")
        assert code == EXIT_VALIDATION and "[hamiltonian]" in err

    def test_unknown_command(self):
        assert run("explode", "--system", SYSTEMS / "free_particle.ini")[0] == EXIT_VALIDATION

    def test_numerical_failure(self):
        code, _, err = run("simulate", "--system", FIXTURES / "blowup.ini")
        assert code == EXIT_NUMERICAL and err.count("\n") == 1 and "non-finite" in err


@pytest.mark.skipif(shutil.which("jetmech") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["jetmech", "derive", "--system", str(SYSTEMS / "free_particle.ini")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "E1 = -qtt1" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "jetmech.cli", "simulate", "--system",
                           str(FIXTURES / "blowup.ini")], capture_output=True, text=True)
    assert proc.returncode == EXIT_NUMERICAL

import dataclasses
import filecmp

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpshell import (
    InitialData,
    IntegratorConfig,
    RefusalError,
    design_fixed_mass,
    design_small_data,
    integrate,
    sample_ensemble,
    verify_focusing_run,
)
from vpshell.design import StageResult, VerificationReport
from vpshell.reporting import (
    RunSetup,
    load_certificate,
    load_run_config,
    load_run_data,
    load_verification_report,
    require_manifest_matches,
    save_certificate,
    save_membership_report,
    save_run,
    save_run_config,
    save_snapshot,
    save_verification_report,
)


@pytest.fixture(scope="module")
def small_run():
    cert = design_small_data(c1=32.0, c2=1e-7, eps=0.2)
    data = InitialData.from_spec(cert.spec)
    ens = sample_ensemble(data, 8, 8, 6)
    setup = RunSetup(certificate_path="certificate.ini", n_r=8, n_w=8, n_ell=6)
    config, marks = setup.resolve(cert)
    result = integrate(ens, config, mark_times=marks)
    return cert, setup, result


class TestCertificateFiles:
    def test_small_data_round_trip(self, tmp_path):
        cert = design_small_data(c1=32.0, c2=1e-7, eps=0.2)
        path = save_certificate(cert, tmp_path / "cert.ini")
        assert load_certificate(path) == cert

    def test_fixed_mass_round_trip(self, tmp_path):
        cert = design_fixed_mass(c1=1.0, c2=1.0, t_horizon=1.0, eps=0.02, exploratory=True)
        loaded = load_certificate(save_certificate(cert, tmp_path / "cert.ini"))
        assert loaded == cert
        assert loaded.exploratory
        assert loaded.c0 == cert.c0 and loaded.eta == cert.eta
        assert loaded.spec.target_mass == 1.0

    def test_optional_fields_absent_for_fixed_mass(self, tmp_path):
        cert = design_fixed_mass(c1=1.0, c2=1.0, t_horizon=1.0)
        loaded = load_certificate(save_certificate(cert, tmp_path / "cert.ini"))
        assert loaded.rho0_sup_bound is None
        assert loaded.e0_sup_bound is None

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_certificate(tmp_path / "nope.ini")


class TestRunConfigFiles:
    def test_round_trip_with_explicit_fields(self, tmp_path):
        setup = RunSetup(
            certificate_path="cert.ini",
            n_r=10, n_w=12, n_ell=8,
            t_end=0.02, dt_max=1e-4, cfl=0.15,
            output_stride=3, n_bins=64,
            mark_times=(0.005, 0.02),
        )
        path = save_run_config(setup, tmp_path / "run.ini")
        assert load_run_config(path) == setup

    def test_round_trip_with_defaults(self, tmp_path):
        setup = RunSetup(certificate_path="cert.ini")
        loaded = load_run_config(save_run_config(setup, tmp_path / "run.ini"))
        assert loaded == setup
        assert loaded.t_end is None and loaded.dt_max is None

    def test_resolve_fills_from_certificate(self):
        cert = design_small_data(c1=32.0, c2=1e-7, eps=0.2)
        config, marks = RunSetup(certificate_path="x").resolve(cert)
        assert config.t_end == cert.t_horizon
        assert config.dt_max == cert.t_horizon / 50.0
        assert marks == (cert.t_horizon,)

    def test_resolve_drops_marks_beyond_horizon(self):
        cert = design_small_data(c1=32.0, c2=1e-7, eps=0.2)
        setup = RunSetup(certificate_path="x", t_end=cert.t_horizon / 2.0)
        _, marks = setup.resolve(cert)
        assert marks == ()


class TestRunRecord:
    def test_round_trip(self, tmp_path, small_run):
        cert, setup, result = small_run
        out = save_run(result, cert, setup, tmp_path / "out")
        summary = load_run_data(out)

        assert summary.rows == result.rows
        assert np.array_equal(summary.turning_time, result.turning_time)
        assert np.array_equal(summary.r_min_shell, result.r_min_shell)
        assert np.array_equal(summary.t_at_r_min, result.t_at_r_min)
        assert len(summary.snapshots) == len(result.snapshots)
        for (ta, ea), (tb, eb) in zip(summary.snapshots, result.snapshots):
            assert ta == tb
            assert np.array_equal(ea.r, eb.r)
            assert np.array_equal(ea.w, eb.w)
            assert np.array_equal(ea.ell, eb.ell)
            assert np.array_equal(ea.weight, eb.weight)
            assert np.array_equal(ea.ids, eb.ids)
        assert summary.final.total_mass == result.final.total_mass

    def test_verification_agrees_after_reload(self, tmp_path, small_run):
        cert, setup, result = small_run
        out = save_run(result, cert, setup, tmp_path / "out")
        summary = load_run_data(out)
        require_manifest_matches(summary, cert)
        a = verify_focusing_run(result, cert)
        b = verify_focusing_run(summary, cert)
        assert [s.status for s in a.stages] == [s.status for s in b.stages]
        assert a.passed and b.passed

    def test_manifest_mismatch_refused(self, tmp_path, small_run):
        cert, setup, result = small_run
        out = save_run(result, cert, setup, tmp_path / "out")
        summary = load_run_data(out)
        other = design_small_data(c1=32.0, c2=1e-7, eps=0.1)
        with pytest.raises(RefusalError):
            require_manifest_matches(summary, other)

    def test_rerun_is_byte_identical(self, tmp_path, small_run):
        cert, setup, result = small_run
        out1 = save_run(result, cert, setup, tmp_path / "a")
        out2 = save_run(result, cert, setup, tmp_path / "b")
        names = sorted(p.name for p in out1.iterdir())
        assert names == sorted(p.name for p in out2.iterdir())
        match, mismatch, errors = filecmp.cmpfiles(out1, out2, names, shallow=False)
        assert mismatch == [] and errors == []

    def test_manifest_has_no_environment_dependent_keys(self, tmp_path, small_run):
        cert, setup, result = small_run
        out = save_run(result, cert, setup, tmp_path / "out")
        text = (out / "manifest.ini").read_text()
        for banned in ("thread", "timestamp", "date", "hostname"):
            assert banned not in text.lower()

    def test_snapshot_writer_standalone(self, tmp_path, small_run):
        _, _, result = small_run
        path = save_snapshot(result.final, tmp_path / "snap.csv")
        header = path.read_text().splitlines()[0]
        assert header == "id,r,w,ell,weight"


class TestReports:
    def test_verification_report_round_trip(self, tmp_path):
        report = VerificationReport(
            stages=(
                StageResult("initial-sup-norms", "pass", "ok"),
                StageResult("turning-after-T", "fail", "one early", witness_id=17),
                StageResult("total-mass", "skipped", "exploratory certificate"),
            ),
            exploratory=True,
        )
        loaded = load_verification_report(
            save_verification_report(report, tmp_path / "v.ini")
        )
        assert loaded == report
        assert not loaded.passed
        assert loaded.first_failure().witness_id == 17

    def test_membership_report_file(self, tmp_path, small_run):
        from vpshell import InitialData, check_membership

        cert, _, result = small_run
        data = InitialData.from_spec(cert.spec)
        report = check_membership(data, result.snapshots[0][1])
        path = save_membership_report(report, tmp_path / "m.ini")
        text = path.read_text()
        assert "[membership]" in text
        assert "passed = true" in text
        assert "[check:support-ellipse]" in text


@given(st.floats(allow_nan=False, allow_infinity=True))
def test_float_formatting_round_trips(x):
    from vpshell.reporting import _fmt

    assert float(_fmt(x)) == x

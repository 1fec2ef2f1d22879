import math
import os

import numpy as np
import pytest

import ohtlab


def test_vacuum_roundtrip():
    rho = ohtlab.make_state(ohtlab.StateSpec.vacuum())
    ds = ohtlab.sample_quadratures(rho, ohtlab.PhaseSchedule.uniform_random(), n=50000, seed=7)
    assert len(ds) == 50000
    assert abs(np.var(ds.q) - 0.5) < 0.02
    est = ohtlab.rho_from_quadratures(ds, ohtlab.build_pattern_functions(8), 0, 3)
    assert est.rho.elements[0, 0].real > 0.97
    n = ohtlab.mean_photon(ds)
    assert abs(n.value) < 4 * n.std_err + 1e-12


def test_wigner_of_coherent_state_peaks_at_displacement():
    alpha = 1.0 + 0.5j
    rho = ohtlab.make_state(ohtlab.StateSpec.coherent(alpha))
    ds = ohtlab.sample_quadratures(rho, ohtlab.PhaseSchedule.grid(32, math.pi), n=100000, seed=3)
    cfg = ohtlab.RadonConfig()
    cfg.n_phase_bins = 32
    w = ohtlab.filtered_backprojection(ds, cfg)
    i, j = np.unravel_index(np.argmax(w.values), w.values.shape)
    assert abs(w.q_axis[i] - math.sqrt(2) * alpha.real) < 0.1
    assert abs(w.p_axis[j] - math.sqrt(2) * alpha.imag) < 0.1
    assert abs(w.integral() - 1) < 0.02


def test_thermal_g2():
    spec = ohtlab.StateSpec.thermal(1.0)
    spec.truncation_dim = 60
    ds = ohtlab.sample_quadratures(ohtlab.make_state(spec), ohtlab.PhaseSchedule.uniform_random(), n=100000, seed=11)
    g2 = ohtlab.g2_single(ds)
    assert abs(g2.value - 2) < 4 * g2.std_err


def test_jsonl_roundtrip_is_exact():
    rho = ohtlab.make_state(ohtlab.StateSpec.fock(1))
    ds = ohtlab.sample_quadratures(rho, ohtlab.PhaseSchedule.grid(4), n=100, seed=1)
    text = ds.to_jsonl()
    back = ohtlab.QuadratureDataset.from_jsonl(text)
    assert np.array_equal(back.q, ds.q)
    assert back.to_jsonl() == text


def test_errors_map_to_exception_classes():
    det = ohtlab.DetectorModel()
    det.eta_q = 1.5
    rho = ohtlab.make_state(ohtlab.StateSpec.vacuum())
    with pytest.raises(ohtlab.ConfigError):
        ohtlab.sample_quadratures(rho, ohtlab.PhaseSchedule.uniform_random(), det, n=10, seed=0)
    with pytest.raises(ohtlab.DataError):
        ohtlab.QuadratureDataset.from_jsonl('{"format":"nope"}\n')
    assert issubclass(ohtlab.AliasingError, ohtlab.DataError)


def test_module_under_test_location():
    build = os.environ.get("OHTLAB_PYTHON_BUILD")
    if build:
        assert ohtlab._core.__file__.startswith(build)

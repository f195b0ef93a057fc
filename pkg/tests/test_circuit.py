import math

import numpy as np
import pytest

from hybridspec.circuit import (
    CircuitElement,
    CircuitError,
    CircuitNetwork,
    WirebondModelParams,
    admittance_matrix,
    build_network,
    coupling_and_shift_vs_length,
    dense_grid_maxima,
    driving_point_impedance,
    elements_table,
    find_resonances,
    loop_driving_point_impedance,
    min_splitting,
    random_network,
    two_lc_coupling,
    two_lc_network,
)

TWO_PI = 2 * math.pi
E = CircuitElement


def lc_tank(L=20e-9, C=130.8e-15, R=37e6):
    return CircuitNetwork(
        (E("R", R, "mw", "gnd", "R_mw"), E("L", L, "mw", "gnd", "L_mw"), E("C", C, "mw", "gnd", "C_mw"))
    )


def f_lc(L, C):
    return 1.0 / (TWO_PI * math.sqrt(L * C))


def test_element_invariants():
    with pytest.raises(CircuitError):
        E("C", 0.0, "a", "gnd")
    with pytest.raises(CircuitError):
        E("L", 1e-9, "a", "a")
    with pytest.raises(CircuitError):
        E("X", 1.0, "a", "gnd")
    with pytest.raises(CircuitError):
        WirebondModelParams(C_p=0.0)


def test_network_invariants():
    with pytest.raises(CircuitError):
        CircuitNetwork((E("C", 1e-12, "a", "b"),))  # no ground
    with pytest.raises(CircuitError):
        CircuitNetwork((E("C", 1e-12, "mw", "gnd"), E("C", 1e-12, "x", "y")))


def test_nominal_network_topology():
    for p in (WirebondModelParams.as_printed(), WirebondModelParams.band_consistent()):
        net = build_network(p)
        assert len(net.elements) == 17
        assert net.ground == "gnd" and net.probe == "mw"
        assert set(net.nodes) == {"mw", "mech", "mech_g", "sig_c", "sig_b", "gnd_c", "gnd_b", "mech_l"} | (
            {"mech_r"} if p.r_m_placement == "series" else set()
        )
    assert elements_table(net)[0] == {"name": "R_mw", "kind": "R", "value": 37e6, "node_a": "mw", "node_b": "gnd"}


def test_reference_values_and_accessors():
    p = WirebondModelParams.as_printed()
    assert (p.L_m, p.C_m, p.R_m, p.C_o, p.C_pm) == (2.73e-9, 1.83e-15, 884e6, 337e-18, 50e-15)
    assert (p.L_mw, p.C_mw, p.R_mw) == (20e-9, 130.8e-15, 37e6)
    assert (p.L_wb_per_mm, p.C_p, p.C_wb, p.R_wb, p.C_pwb_per_mm) == (1e-9, 3.9e-15, 20e-12, 0.4, 7e-15)
    assert p.characteristic_impedance == pytest.approx(math.sqrt(20e-9 / 130.8e-15))
    assert 350 < p.characteristic_impedance < 450
    assert p.microwave_frequency == pytest.approx(f_lc(20e-9, 130.8e-15))
    # the printed motional arm sits far above the band; the uH reading lands in it
    assert p.mechanical_frequency == pytest.approx(f_lc(2.73e-9, 1.83e-15))
    assert p.mechanical_frequency > 50e9
    assert 2.0e9 < WirebondModelParams.band_consistent().mechanical_frequency < 2.5e9


def test_cp_side_toggle_moves_the_capacitor():
    chip = build_network(WirebondModelParams.band_consistent())
    far = build_network(WirebondModelParams.band_consistent(cp_side="far"))
    assert chip.element("C_p_sig").node_a == "sig_b"
    assert far.element("C_p_sig").node_a == "mech"
    w = TWO_PI * 3e9
    assert driving_point_impedance(chip, w) != driving_point_impedance(far, w)


def test_single_capacitor_stamp():
    net = CircuitNetwork((E("C", 2e-12, "mw", "gnd"),))
    w = TWO_PI * 1e9
    np.testing.assert_array_equal(admittance_matrix(net, w), [[1j * w * 2e-12]])


def test_admittance_symmetric(rng):
    nets = [build_network(WirebondModelParams.band_consistent())] + [random_network(rng) for _ in range(20)]
    for net in nets:
        for f in (1e8, 2.2e9, 3e9, 7e9):
            y = admittance_matrix(net, TWO_PI * f)
            np.testing.assert_array_equal(y, y.T)


def test_nodal_and_loop_agree_on_nominal_network():
    for p in (WirebondModelParams.as_printed(), WirebondModelParams.band_consistent()):
        net = build_network(p)
        w = TWO_PI * 3e9
        z_nodal = driving_point_impedance(net, w)
        z_loop = loop_driving_point_impedance(net, w)
        assert abs(z_nodal - z_loop) / abs(z_loop) < 1e-9


def test_nodal_and_loop_agree_on_random_networks(rng):
    for _ in range(100):
        net = random_network(rng, n_nodes=int(rng.integers(2, 8)), n_extra=int(rng.integers(0, 10)))
        w = TWO_PI * float(rng.uniform(0.1e9, 10e9))
        z_nodal = driving_point_impedance(net, w)
        z_loop = loop_driving_point_impedance(net, w)
        assert abs(z_nodal - z_loop) / abs(z_loop) < 1e-9


def test_passivity(rng):
    w = TWO_PI * np.geomspace(1e7, 2e10, 400)
    for _ in range(50):
        z = driving_point_impedance(random_network(rng), w)
        assert np.all(z.real >= -1e-12 * np.abs(z))


def test_bare_tank_resonance_closed_form():
    f0 = f_lc(20e-9, 130.8e-15)
    f = np.linspace(0.9 * f0, 1.1 * f0, 2001)
    mag = np.abs(driving_point_impedance(lc_tank(), TWO_PI * f))
    assert abs(f[np.argmax(mag)] - f0) <= f[1] - f[0]
    res = find_resonances(lc_tank(), 1e9, 5e9, n_grid=2000)
    assert len(res) == 1
    assert res[0].frequency == pytest.approx(f0, rel=1e-6)


def test_loop_series_inductance_lowers_resonance():
    L, C, Ls = 20e-9, 130.8e-15, 2e-9
    net = CircuitNetwork(
        (
            E("C", C, "mw", "gnd", "C_mw"),
            E("R", 37e6, "mw", "gnd", "R_mw"),
            E("L", L, "mw", "x", "L_mw"),
            E("L", Ls, "x", "gnd", "L_wb"),
        )
    )
    (res,) = find_resonances(net, 1e9, 5e9)
    assert res.frequency < f_lc(L, C)
    assert res.frequency == pytest.approx(f_lc(L + Ls, C), rel=1e-6)


def test_parallel_rlc_linewidth():
    R, L, C = 1e4, 20e-9, 130.8e-15
    (res,) = find_resonances(lc_tank(L, C, R), 2e9, 4e9)
    # half-power width of |Z| for a parallel RLC is 1/(2 pi R C)
    assert res.linewidth == pytest.approx(1 / (TWO_PI * R * C), rel=1e-6)


def test_find_resonances_preconditions():
    with pytest.raises(CircuitError):
        find_resonances(lc_tank(), 3e9, 3e9)
    with pytest.raises(CircuitError):
        find_resonances(lc_tank(), 1e9, 5e9, n_grid=50)
    assert find_resonances(lc_tank(), 1e9, 2e9) == []


def test_band_consistent_network_has_two_resonances_matching_dense_grid():
    net = build_network(WirebondModelParams.band_consistent())
    n_grid = 2000
    res = find_resonances(net, 1e9, 5e9, n_grid=n_grid)
    assert len(res) == 2
    coarse_step = 4e9 / (n_grid - 1)
    oracle = dense_grid_maxima(net, 1e9, 5e9, n_grid=1_000_000)
    assert len(oracle) == 2
    for r, f in zip(res, oracle):
        assert abs(r.frequency - f) <= coarse_step
        assert 0 < r.linewidth < 10e6


def test_as_printed_network_has_one_in_band_resonance():
    net = build_network(WirebondModelParams.as_printed())
    assert len(find_resonances(net, 1e9, 5e9)) == 1


def test_short_bond_is_near_galvanic():
    p = WirebondModelParams.band_consistent(length=1e-6)
    net = build_network(p)
    y = admittance_matrix(net, TWO_PI * 3e9)
    rhs = np.zeros(len(net.nodes), dtype=complex)
    rhs[net.nodes.index("mw")] = 1.0
    v = dict(zip(net.nodes, np.linalg.solve(y, rhs)))
    # only the 20 pF contact capacitors remain in series
    assert abs(v["mech"] / v["mw"] - 1) < 1e-2
    assert abs(v["mech_g"] / v["mw"]) < 1e-3


def test_no_parasitics_no_length_means_no_shift():
    tiny = 1e-24
    p = WirebondModelParams.as_printed(
        C_m=tiny, C_o=tiny, C_pm=tiny, C_p=tiny, C_pwb_per_mm=tiny, length=1e-6
    )
    (point,) = coupling_and_shift_vs_length(p, [1e-6])
    assert abs(point.shift) / p.microwave_frequency < 1e-6


def test_two_lc_avoided_crossing():
    L1 = L2 = 20e-9
    C1 = C2 = 130.8e-15
    Cc = 2e-15
    f0 = 1.0 / (TWO_PI * math.sqrt(L2 * (C2 + Cc)))
    crossing = min_splitting(
        lambda s: two_lc_network(L1 * s, C1, L2, C2, Cc),
        0.9 * f0,
        1.1 * f0,
        0.9,
        1.1,
    )
    assert crossing.g == pytest.approx(two_lc_coupling(C1, L2, C2, Cc), rel=0.01)
    assert crossing.scale == pytest.approx(1.0, abs=0.01)


def test_unbracketed_crossing_raises():
    with pytest.raises(CircuitError):
        min_splitting(
            lambda s: two_lc_network(20e-9 * s, 130.8e-15, 20e-9, 130.8e-15, 2e-15),
            2.5e9, 3.8e9, 1.2, 1.5,
        )


def test_coupling_and_shift_versus_length():
    p = WirebondModelParams.band_consistent()
    lengths = [0.5, 1.0, 2.0, 3.0]
    pts = coupling_and_shift_vs_length(p, lengths)
    assert all(pt.error is None for pt in pts)
    g = np.array([pt.g for pt in pts])
    shift = np.array([pt.shift for pt in pts])
    assert np.all(np.diff(g) <= 0)
    assert np.all(np.diff(shift) > 0)
    rel_shift = (shift[-1] - shift[0]) / shift[0]
    rel_g = abs(g[-1] - g[0]) / g[0]
    assert rel_shift > rel_g


def test_bad_length_gives_error_entry():
    (pt,) = coupling_and_shift_vs_length(WirebondModelParams.band_consistent(), [-1.0])
    assert pt.error and math.isnan(pt.g)

import numpy as np
import pytest

from elastobayes import fem, synthetic, topo
from elastobayes.errors import ConfigurationError, DetectionError
from elastobayes.prior import CircleGuess
from elastobayes.shapes import circle, from_blocks

from conftest import tiny_config


def test_default_fractions_cover_array():
    fr = topo.default_fractions(19)
    assert len(fr) == 3
    assert set().union(*map(set, fr)) == set(range(19))
    assert fr[0][0] == 0 and fr[-1][-1] == 18


def test_trapezoid_weights():
    t = np.linspace(0, 2, 9)
    w = topo.trapezoid_weights(t)
    assert w.sum() == pytest.approx(2.0)
    assert np.dot(w, t**1) == pytest.approx(2.0)


def test_threshold_and_components(tiny):
    mesh = fem.build_mesh(tiny)
    x, y = mesh.nodes.T
    vals = np.exp(-((x - 1) ** 2 + (y + 1.4) ** 2) / 0.05) + 0.9 * np.exp(-((x - 3) ** 2 + (y + 2) ** 2) / 0.05)
    E = topo.EnergyField(mesh, vals)
    mask = topo.threshold(E, 0.3)
    comps = topo.components(mask, mesh)
    assert len(comps) == 2
    found = topo.detect([E], topo.TopoConfig(surface_mute=0.0), 0.3)
    assert (found[0].cx, found[0].cy) == pytest.approx((1.0, -1.4), abs=0.11)
    assert (found[1].cx, found[1].cy) == pytest.approx((3.0, -2.0), abs=0.11)
    assert found[0].peak > found[1].peak


def test_detect_merges_close_peaks(tiny):
    mesh = fem.build_mesh(tiny)
    x, y = mesh.nodes.T
    a = topo.EnergyField(mesh, np.exp(-((x - 2) ** 2 + (y + 1.5) ** 2) / 0.05), 0)
    b = topo.EnergyField(mesh, 2 * np.exp(-((x - 2.2) ** 2 + (y + 1.5) ** 2) / 0.05), 1)
    found = topo.detect([a, b], topo.TopoConfig(surface_mute=0.0))
    assert len(found) == 1 and found[0].fraction_id == 1


def test_surface_mute_and_empty_field(tiny):
    mesh = fem.build_mesh(tiny)
    x, y = mesh.nodes.T
    E = topo.EnergyField(mesh, np.where(y > -0.5, np.exp(-((x - 2) ** 2 + y**2) / 0.05), 0.0))
    with pytest.raises(DetectionError):
        topo.detect([E], topo.TopoConfig(surface_mute=1.0))
    with pytest.raises(DetectionError):
        topo.threshold(topo.EnergyField(mesh, np.zeros(mesh.n_nodes)), 0.3)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        topo.TopoConfig(C0=1.5)
    with pytest.raises(ConfigurationError):
        topo.TopoConfig(fractions=((),))


def test_circles_csv_round_trip(tmp_path):
    cs = [CircleGuess(1.0, -2.0, 0.3, 0), CircleGuess(3.0, -1.0, 0.4, 2)]
    topo.write_circles_csv(tmp_path / "c.csv", cs)
    back = topo.read_circles_csv(tmp_path / "c.csv")
    assert [(c.cx, c.cy, c.rho0, c.fraction_id) for c in back] == [(c.cx, c.cy, c.rho0, c.fraction_id) for c in cs]


def test_energy_locates_inclusion():
    data_cfg = tiny_config(dx=0.1, dt=0.01)
    inv_cfg = tiny_config()
    clean = synthetic.generate_truth(from_blocks([circle(2.0, -1.6, 0.5, 16.0)]), data_cfg)
    res = topo.topological_prior_guesses(synthetic.split(clean).d_even, inv_cfg,
                                         topo.TopoConfig(surface_mute=1.0, peak_min_separation=1.0))
    assert np.all(res.full_field.values >= 0)
    assert res.full_field.muted(0.5).argmax_point() == pytest.approx((2.0, -1.6))
    best = res.circles[0]
    assert np.hypot(best.cx - 2.0, best.cy + 1.6) < 0.3

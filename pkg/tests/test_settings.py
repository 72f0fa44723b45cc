import configparser

import pytest

from elastobayes.errors import ConfigurationError
from elastobayes.settings import Settings, load_settings, parse_settings


def parse(text):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    return parse_settings(cp)


def test_defaults():
    s = load_settings(None)
    assert s == Settings()
    assert s.simulation.dx == 0.08 and s.inversion().dx == pytest.approx(0.16)
    assert s.truth().L == 1


def test_sections_are_typed():
    s = parse("""
[domain]
dx = 0.1     # cell size
coarsen = 1
[source]
receivers_start = 1.0
receivers_stop = 2.0
receivers_step = 0.5
[truth]
circles = 3 -2 0.5 9; 6 -3 0.7 25
alpha = 2.5
[prior]
variant = piecewise
order = 50
rho_length = 0.3
var_mu = 1.0
C0 = 0.2
[sampler]
kind = AIES
W = 40
S = 300
rng_seed = None
[optimizer]
tol = 1e-6
eta_mu = 0.3
laplace_samples = 50
""")
    assert s.simulation.dx == 0.1 and s.inversion() is s.simulation
    assert len(s.simulation.receivers) == 3
    assert s.truth_circles == ((3.0, -2.0, 0.5, 9.0), (6.0, -3.0, 0.7, 25.0)) and s.alpha == 2.5
    assert (s.variant, s.order) == ("piecewise", 50)
    assert s.hyper.matern.rho_length == 0.3 and s.hyper.var_mu == 1.0
    assert s.topo.C0 == 0.2
    assert (s.sampler.kind, s.sampler.W, s.sampler.S, s.sampler.rng_seed) == ("AIES", 40, 300, None)
    assert s.optimizer.tol == 1e-6 and s.optimizer.eta.mu == 0.3 and s.laplace_samples == 50


@pytest.mark.parametrize("text", [
    "[mystery]\nx = 1\n",
    "[truth]\ncircles = 1 2 3\n",
    "[sampler]\nkind = NUTS\n",
    "[prior]\nC0 = 2\n",
])
def test_bad_settings_raise(text):
    with pytest.raises(ConfigurationError):
        parse(text)


def test_shipped_configs_load():
    for name in ("single_circle", "smoke"):
        s = load_settings(f"configs/{name}.ini")
        s.simulation.validate()
        s.inversion().validate()

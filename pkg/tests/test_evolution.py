import csv
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaprime.evolution import (EvolutionConfig, LinearPropagator, Perturbation,
                                  antisymmetry_defect, evolve, linear_half_step, orbital_distance,
                                  orbital_phase, perturb, perturbation_direction, stability_probe)
from deltaprime.ground_state import build_state, solve_symmetric
from deltaprime.model import (Grid, QFunction, ValidationError, linear_eigenfunction, lp_norm_p,
                              make_params, q_norm)


def wave_packet(grid, x0=6.0, k=1.0):
    return QFunction(grid, (np.exp(-(grid.x - x0) ** 2) * np.exp(1j * k * grid.x)).astype(complex))


@pytest.fixture(scope="module")
def small_state():
    p = make_params(2, 1, 1)
    return build_state(p, 1.5, solve_symmetric(p, 1.5), Grid(20.0, 500))


class TestConfig:
    def test_default_dt(self):
        g = Grid(20.0, 500)
        assert EvolutionConfig().resolve_dt(g) == pytest.approx(g.h / 16)

    def test_cfl_enforced(self):
        g = Grid(20.0, 500)
        with pytest.raises(ValidationError, match="cfl"):
            EvolutionConfig(dt=g.h).resolve_dt(g)
        assert EvolutionConfig(dt=g.h, cfl=1.0).resolve_dt(g) == g.h

    @pytest.mark.parametrize("kw", [{"dt": -1.0}, {"T": 0.0}, {"scheme": "rk4"},
                                    {"monitor_stride": 0}])
    def test_rejects(self, kw):
        with pytest.raises(ValidationError):
            EvolutionConfig(**kw).resolve_dt(Grid(20.0, 500))


class TestLinearStep:
    def test_bound_state_phase(self):
        p = make_params(2, 1, 1)
        g = Grid(30.0, 4000)
        f = linear_eigenfunction(p, g)
        dt = g.h / 16
        n = round(1.0 / dt)
        prop = LinearPropagator(p, g, dt)
        u = f.values
        for _ in range(n):
            u = prop.step(u)
        phase = np.angle(np.sum(g.weights * np.conj(f.values) * u))
        assert abs(phase - 4.0 / p.gamma**2 * n * dt) < 1e-4

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 0.2))
    def test_unitary(self, seed, dt):
        p = make_params(1.3, 1, 1)
        g = Grid(10.0, 200)
        rng = np.random.default_rng(seed)
        v = rng.normal(size=g.size) + 1j * rng.normal(size=g.size)
        v[[0, -1]] = 0
        f = QFunction(g, v)
        out = linear_half_step(f, p, dt)
        assert lp_norm_p(out, 2) == pytest.approx(lp_norm_p(f, 2), rel=1e-12)
        assert out.values[0] == 0 and out.values[-1] == 0

    def test_parity_kept_exactly(self, small_state):
        p = small_state.params
        prop = LinearPropagator(p, small_state.profile.grid, 0.01)
        u = small_state.profile.values
        for _ in range(50):
            u = prop.step(u)
        assert antisymmetry_defect(small_state.profile.with_values(u)) == 0.0


class TestOrbital:
    def test_phase_orbit(self, small_state):
        f = small_state.profile
        for a in (0.3, 2.0, -3.0):
            g = f * np.exp(1j * a)
            assert orbital_distance(g, f) < 1e-12 * q_norm(f)
            assert orbital_phase(g, f) == pytest.approx(a)

    def test_first_order(self, small_state):
        f = small_state.profile
        g = perturbation_direction(small_state, Perturbation("generic", seed=3)).values.real
        g = QFunction(f.grid, g.astype(complex))
        # project out the real direction along f and the phase direction i f
        from deltaprime.model import q_inner
        g = g - f * (q_inner(f, g).real / q_inner(f, f).real)
        d = 1e-4
        assert orbital_distance(f + g * d, f) == pytest.approx(d * q_norm(g), rel=1e-3)

    def test_brute_force_theta(self, small_state):
        f = small_state.profile
        g = perturb(small_state, Perturbation("generic", 0.3, seed=5)) * np.exp(0.7j)
        thetas = np.linspace(-math.pi, math.pi, 10001)
        dists = [q_norm(g - f * np.exp(1j * t)) for t in thetas]
        best = thetas[int(np.argmin(dists))]
        th = orbital_phase(g, f)
        assert abs(np.angle(np.exp(1j * (th - best)))) < 2 * math.pi / 10000
        assert orbital_distance(g, f) <= min(dists) + 1e-8


class TestEvolve:
    def test_ground_state_short(self, small_state):
        tr = evolve(small_state.profile, small_state.params, EvolutionConfig(T=1.0))
        assert tr.mass_drift < 1e-12
        assert tr.energy_drift < 1e-6
        assert tr.orbital_distance.max() < 1e-2
        assert not tr.blowup_flag
        assert tr.times[-1] == pytest.approx(1.0)

    def test_mass_per_step(self, small_state):
        init = perturb(small_state, Perturbation("generic", 0.1))
        tr = evolve(init, small_state.params, EvolutionConfig(T=0.5, monitor_stride=1))
        assert tr.max_step_mass_change < 1e-12

    def test_second_order_in_time(self):
        p = make_params(2, 1, 1)
        g = Grid(20.0, 500)
        init = wave_packet(g)
        ref = evolve(init, p, EvolutionConfig(dt=1 / 6400, T=1.0)).final
        errs, drifts = [], []
        for dt in (1 / 50, 1 / 100, 1 / 200):
            tr = evolve(init, p, EvolutionConfig(dt=dt, T=1.0))
            errs.append(q_norm(tr.final - ref))
            drifts.append(tr.energy_drift)
        for e in (errs, drifts):
            r = np.array(e[:-1]) / np.array(e[1:])
            assert np.all((r > 3.5) & (r < 4.5))

    def test_antisymmetric_data(self, small_state):
        init = perturb(small_state, Perturbation("antisymmetric", 1e-2, seed=1))
        tr = evolve(init, small_state.params, EvolutionConfig(T=2.0))
        assert np.max(tr.antisymmetry_defect) < 1e-10

    def test_snapshots_and_csv(self, small_state, tmp_path):
        cfg = EvolutionConfig(T=0.5, snapshot_times=(0.0, 0.25))
        tr = evolve(small_state.profile, small_state.params, cfg)
        assert set(tr.snapshots) == {0.0, 0.25}
        path = tr.write_csv(tmp_path / "trace.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["t", "M", "E", "orbital_distance"] and len(rows) == len(tr.times) + 1

    def test_blowup_flag(self, small_state, caplog):
        cfg = EvolutionConfig(T=0.5, blowup_factor=0.5)
        with caplog.at_level(logging.WARNING, logger="deltaprime.evolution"):
            tr = evolve(small_state.profile, small_state.params, cfg)
        assert tr.blowup_flag and tr.times[-1] < 0.5
        assert "blow-up" in caplog.text

    @pytest.mark.parametrize("mu", [0.5, 1.0, 1.5])
    def test_no_blowup_subcritical(self, mu):
        p = make_params(2, 1, mu)
        s = build_state(p, 2.0 * p.omega0, solve_symmetric(p, 2.0 * p.omega0), Grid(20.0, 400))
        tr = evolve(perturb(s, Perturbation("generic", 0.05)), p, EvolutionConfig(T=2.0))
        assert not tr.blowup_flag


class TestPerturbation:
    def test_validation(self):
        with pytest.raises(ValidationError):
            Perturbation("rotate")
        with pytest.raises(ValidationError):
            Perturbation(amplitude=0.0)

    @pytest.mark.parametrize("kind", ["generic", "antisymmetric", "shift"])
    def test_amplitude(self, small_state, kind):
        f = perturb(small_state, Perturbation(kind, 1e-3, seed=2))
        d = q_norm(f - small_state.profile)
        assert d == pytest.approx(1e-3 * q_norm(small_state.profile), rel=1e-12)

    def test_seeded(self, small_state):
        a = perturbation_direction(small_state, Perturbation(seed=4)).values
        b = perturbation_direction(small_state, Perturbation(seed=4)).values
        c = perturbation_direction(small_state, Perturbation(seed=5)).values
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_probe_stable_short(self):
        p = make_params(2, 1, 1)
        res = stability_probe(p, 1.5, "symmetric", Perturbation("generic", 1e-3),
                              EvolutionConfig(T=2.0), grid=Grid(25.0, 500))
        assert res.growth_factor < 5
        assert res.trace.orbital_distance[0] == pytest.approx(
            1e-3 * q_norm(res.state.profile), rel=0.5)

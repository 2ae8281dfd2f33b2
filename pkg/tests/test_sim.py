import math
import subprocess
import sys

import numpy as np
import pytest

from popkit import sim
from popkit.chain import one_step_expectation
from popkit.protocol import Configuration, parse_protocol
from popkit.sim import (
    ensemble,
    ensemble_csv,
    fluctuation_samples,
    make_rng,
    nearest_start_count,
    rescale,
    run_metadata,
    run_to_absorption,
    simulate,
    trajectory_csv,
)


class TestSeeding:
    def test_derive_key_distinct(self):
        keys = {
            sim.derive_key(s, r, st)
            for s in range(4)
            for r in range(4)
            for st in range(4)
        }
        assert len(keys) == 64

    def test_same_args_same_stream(self):
        a = make_rng(7, 3).random(16)
        b = make_rng(7, 3).random(16)
        assert (a == b).all()

    def test_different_runs_differ(self):
        a = make_rng(7, 3).random(16)
        b = make_rng(7, 4).random(16)
        assert (a != b).any()


class TestSimulate:
    def test_determinism(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 100})
        a = simulate(sqrt2_spec, c0, 5000, seed=1, thin=10)
        b = simulate(sqrt2_spec, c0, 5000, seed=1, thin=10)
        assert (a.counts == b.counts).all()
        c = simulate(sqrt2_spec, c0, 5000, seed=2, thin=10)
        assert (a.counts != c.counts).any()

    def test_conservation(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 17, "-": 33})
        traj = simulate(sqrt2_spec, c0, 2000, seed=5, thin=1)
        assert (traj.counts.sum(axis=1) == 50).all()

    def test_jump_bound(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 40})
        traj = simulate(sqrt2_spec, c0, 2000, seed=9, thin=1)
        jumps = np.abs(np.diff(traj.counts[:, 0]))
        assert jumps.max() <= 2

    def test_first_step_forced_from_all_minus(self, sqrt2_spec):
        # only (-,-) pairs exist, and -- -> +- creates exactly one '+'
        c0 = Configuration.from_counts({"+": 0, "-": 10})
        for seed in range(20):
            traj = simulate(sqrt2_spec, c0, 1, seed=seed, thin=1)
            assert traj.counts[1, 0] == 1

    def test_one_step_mean_matches_exact_drift(self, sqrt2_spec):
        # frozen configuration, many seeds: empirical one-step increment
        # within 4 standard errors of the exact conditional expectation
        c0 = Configuration.from_counts({"+": 30, "-": 20})
        exact = float(one_step_expectation(sqrt2_spec, c0)["+"])
        m = 4000
        incs = np.array(
            [
                simulate(sqrt2_spec, c0, 1, seed=s, thin=1).counts[1, 0] - 30
                for s in range(m)
            ],
            dtype=float,
        )
        se = incs.std(ddof=1) / math.sqrt(m)
        assert abs(incs.mean() - exact) < 4 * se

    def test_records_include_initial_and_final(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 3, "-": 7})
        traj = simulate(sqrt2_spec, c0, 107, seed=0, thin=10)
        assert traj.ks[0] == 0
        assert traj.ks[-1] == 107
        assert (traj.counts[0] == [3, 7]).all()

    def test_zero_steps(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 3, "-": 7})
        traj = simulate(sqrt2_spec, c0, 0, seed=0)
        assert traj.counts.shape == (1, 2)

    def test_bad_args(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 3, "-": 7})
        with pytest.raises(ValueError):
            simulate(sqrt2_spec, c0, -1, seed=0)
        with pytest.raises(ValueError):
            simulate(sqrt2_spec, c0, 10, seed=0, thin=0)

    def test_identity_protocol_frozen(self):
        spec = parse_protocol("states: A B\n")
        c0 = Configuration.from_counts({"A": 4, "B": 6})
        traj = simulate(spec, c0, 500, seed=3, thin=1)
        assert (traj.counts == [4, 6]).all()


class TestBackends:
    def test_python_fallback_bit_identical(self, sqrt2_spec, tmp_path):
        c0 = Configuration.from_counts({"+": 0, "-": 200})
        here = simulate(sqrt2_spec, c0, 20_000, seed=42, thin=100)
        script = (
            "import numpy as np\n"
            "from popkit.protocol import Configuration, parse_protocol\n"
            "from popkit import sim\n"
            "spec = parse_protocol('states: + -\\n"
            "rule: + + -> + -\\nrule: + - -> + +\\n"
            "rule: - + -> + +\\nrule: - - -> + -\\n')\n"
            "c0 = Configuration.from_counts({'+': 0, '-': 200})\n"
            "t = sim.simulate(spec, c0, 20_000, seed=42, thin=100)\n"
            "assert sim.BACKEND == 'python', sim.BACKEND\n"
            f"np.save({str(tmp_path / 'out.npy')!r}, t.counts)\n"
        )
        env = {"POPKIT_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"}
        subprocess.run(
            [sys.executable, "-c", script], check=True, env=env
        )
        other = np.load(tmp_path / "out.npy")
        assert (here.counts == other).all()


class TestRescale:
    def test_times_are_k_over_n(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 50})
        traj = simulate(sqrt2_spec, c0, 100, seed=0, thin=10)
        path = rescale(traj)
        assert np.allclose(path.ts, traj.ks / 50)
        assert (path.values[0] == [0.0, 1.0]).all()

    def test_interpolation_midpoint(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 10})
        traj = simulate(sqrt2_spec, c0, 20, seed=0, thin=20)
        path = rescale(traj)
        mid = path.at((path.ts[0] + path.ts[-1]) / 2)
        expect = (path.values[0] + path.values[-1]) / 2
        assert np.allclose(mid, expect)

    def test_exact_at_knots(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 10})
        path = rescale(simulate(sqrt2_spec, c0, 30, seed=1, thin=3))
        for i, t in enumerate(path.ts):
            assert np.allclose(path.at(t), path.values[i])

    def test_out_of_range(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 10})
        path = rescale(simulate(sqrt2_spec, c0, 10, seed=1, thin=1))
        with pytest.raises(ValueError):
            path.at(path.ts[-1] + 1.0)


class TestEnsemble:
    def test_determinism_across_workers(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 100})
        grid = np.linspace(0, 2, 9)
        one = ensemble(sqrt2_spec, c0, 2.0, 8, seed=11, grid=grid, workers=1)
        two = ensemble(sqrt2_spec, c0, 2.0, 8, seed=11, grid=grid, workers=4)
        assert (one.mean == two.mean).all()
        assert (one.var == two.var).all()

    def test_identity_protocol_zero_variance(self):
        spec = parse_protocol("states: A B\n")
        c0 = Configuration.from_counts({"A": 5, "B": 5})
        stats = ensemble(spec, c0, 1.0, 4, seed=0, grid=[0.0, 0.5, 1.0])
        assert (stats.var == 0).all()
        assert np.allclose(stats.mean, 0.5)

    def test_mean_tracks_ode_loosely(self, sqrt2_spec):
        n = 2000
        c0 = Configuration.from_counts({"+": 0, "-": n})
        stats = ensemble(sqrt2_spec, c0, 1.0, 10, seed=4, grid=[1.0])
        expect = math.tanh(math.sqrt(2)) / math.sqrt(2)
        assert abs(stats.mean[0, 0] - expect) < 0.05

    def test_bad_args(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 10})
        with pytest.raises(ValueError):
            ensemble(sqrt2_spec, c0, 1.0, 1, seed=0, grid=[0.5])
        with pytest.raises(ValueError):
            ensemble(sqrt2_spec, c0, 1.0, 4, seed=0, grid=[2.0])
        with pytest.raises(ValueError):
            ensemble(sqrt2_spec, c0, 0.0, 4, seed=0, grid=[0.0])


class TestNearestStartCount:
    @pytest.mark.parametrize(
        "n,p,expect",
        [
            (10, 0.5, 5),
            (10, 0.707, 7),
            (10, 0.75, 7),  # tie goes to floor
            (10, 0.76, 8),
            (3, 0.99, 3),
            (4, 0.01, 0),
        ],
    )
    def test_cases(self, n, p, expect):
        assert nearest_start_count(n, p) == expect

    def test_error_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 1000))
            p = float(rng.random())
            i = nearest_start_count(n, p)
            assert 0 <= i <= n
            assert abs(i / n - p) <= 0.5 / n + 1e-12


class TestFluctuationSamples:
    def test_shape_and_determinism(self, sqrt2_spec):
        args = dict(
            spec=sqrt2_spec,
            plus_state="+",
            p_star=math.sqrt(2) / 2,
            n=500,
            m_runs=16,
            t_end=2.0,
            burn_in=1.0,
            seed=21,
        )
        a = fluctuation_samples(**args)
        b = fluctuation_samples(**args, workers=4)
        assert a.shape == (16,)
        assert (a == b).all()

    def test_scale_is_plausible(self, sqrt2_spec):
        samples = fluctuation_samples(
            sqrt2_spec, "+", math.sqrt(2) / 2, 400, 64, 3.0, 1.0, seed=8
        )
        # stationary sd is 2**-0.75 ~ 0.42; crude sanity band
        assert 0.1 < samples.std(ddof=1) < 1.5

    def test_rejects_three_states(self):
        spec = parse_protocol("states: A B C\n")
        c0 = Configuration.from_counts({"A": 2, "B": 2, "C": 2})
        with pytest.raises(ValueError):
            fluctuation_samples(spec, "A", 0.5, 6, 4, 1.0, 0.5, seed=0)

    def test_bad_burn_in(self, sqrt2_spec):
        with pytest.raises(ValueError):
            fluctuation_samples(sqrt2_spec, "+", 0.7, 10, 4, 1.0, 2.0, seed=0)


class TestAbsorption:
    def test_absorbs_at_all_plus(self):
        doc = "states: + -\nrule: + - -> + +\nrule: - + -> + +\nrule: - - -> + +\n"
        spec = parse_protocol(doc)
        c0 = Configuration.from_counts({"+": 1, "-": 99})
        final, steps, absorbed = run_to_absorption(spec, c0, 100_000, seed=2)
        assert absorbed
        assert (final == [100, 0]).all()
        assert steps < 100_000

    def test_not_absorbed_reports_false(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 10, "-": 10})
        final, steps, absorbed = run_to_absorption(sqrt2_spec, c0, 1000, seed=2)
        assert not absorbed
        assert steps == 1000
        assert final.sum() == 20


class TestOutputs:
    def test_trajectory_csv(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 1, "-": 3})
        traj = simulate(sqrt2_spec, c0, 4, seed=0, thin=2)
        lines = trajectory_csv(traj).strip().splitlines()
        assert lines[0] == "k,t,+,-"
        assert lines[1] == "0,0,0.25,0.75"
        assert len(lines) == 1 + len(traj.ks)

    def test_ensemble_csv(self, sqrt2_spec):
        c0 = Configuration.from_counts({"+": 0, "-": 20})
        stats = ensemble(sqrt2_spec, c0, 1.0, 3, seed=0, grid=[0.0, 1.0])
        lines = ensemble_csv(stats).strip().splitlines()
        assert lines[0] == "t,state,mean,var,m_runs"
        assert len(lines) == 1 + 2 * 2

    def test_run_metadata(self, sqrt2_spec):
        meta = run_metadata(sqrt2_spec, 50, 7, 10)
        assert meta["n"] == 50 and meta["seed"] == 7 and meta["thin"] == 10
        assert meta["rng"] == sim.RNG_ID
        assert meta["backend"] in ("cython", "python")
        assert meta["protocol_hash"] == sqrt2_spec.content_hash()

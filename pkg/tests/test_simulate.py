import numpy as np
import pytest

from elbreak import (
    InputError,
    NoiseModel,
    PowerStudyConfig,
    empirical_critval_study,
    gen_ar_change,
    gumbel_quantile,
    parse_power_config,
    power_study,
    sample_noise,
)


class TestSampleNoise:
    @pytest.mark.parametrize("kind", list(NoiseModel))
    def test_standardization(self, kind):
        draws = sample_noise(kind, 1_000_000, seed=99)
        assert abs(draws.mean()) < 0.005
        band = 0.1 if kind == NoiseModel.SCALED_T4 else 0.02
        assert abs(draws.var() - 1.0) < band

    def test_exponential_support(self):
        draws = sample_noise(NoiseModel.CENTERED_EXPONENTIAL, 200_000, seed=1)
        assert draws.min() > -1.0

    def test_chisq_support(self):
        draws = sample_noise(NoiseModel.STANDARDIZED_CHISQ4, 200_000, seed=1)
        assert draws.min() > -np.sqrt(2.0)

    def test_deterministic(self):
        a = sample_noise(NoiseModel.GAUSSIAN, 1000, seed=5)
        b = sample_noise(NoiseModel.GAUSSIAN, 1000, seed=5)
        assert np.array_equal(a, b)

    def test_from_name(self):
        assert NoiseModel.from_name("Gaussian") is NoiseModel.GAUSSIAN
        with pytest.raises(InputError):
            NoiseModel.from_name("cauchy")

    def test_count_floor(self):
        with pytest.raises(InputError):
            sample_noise(NoiseModel.GAUSSIAN, 0, seed=1)


class TestGenArChange:
    def test_no_change_branch_collapses(self):
        a = gen_ar_change(200, 30, 0.4, 0.4, seed=8)
        b = gen_ar_change(200, 170, 0.4, 0.4, seed=8)
        assert np.array_equal(a.values, b.values)

    def test_white_noise_autocorrelation(self):
        ts = gen_ar_change(100_000, 99_999, 0.0, 0.0, seed=1)
        x = ts.values
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert abs(r1) < 3.0 / np.sqrt(100_000)

    def test_ar_half_autocorrelation(self):
        ts = gen_ar_change(100_000, 99_999, 0.5, 0.5, seed=2)
        x = ts.values
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert r1 == pytest.approx(0.5, abs=0.01)

    def test_change_is_effective(self):
        ts = gen_ar_change(100_000, 50_000, 0.1, 0.5, seed=3)
        x = ts.values
        pre = np.corrcoef(x[:49_999], x[1:50_000])[0, 1]
        post = np.corrcoef(x[50_000:-1], x[50_001:])[0, 1]
        assert pre == pytest.approx(0.1, abs=0.02)
        assert post == pytest.approx(0.5, abs=0.02)

    def test_nonstationary_rejected(self):
        with pytest.raises(InputError, match="non-stationary"):
            gen_ar_change(100, 50, 1.0, 0.5)
        with pytest.raises(InputError, match="non-stationary"):
            gen_ar_change(100, 50, 0.1, 1.01)

    def test_k_domain(self):
        with pytest.raises(InputError):
            gen_ar_change(100, 0, 0.1, 0.5)
        with pytest.raises(InputError):
            gen_ar_change(100, 100, 0.1, 0.5)

    def test_deterministic(self):
        a = gen_ar_change(150, 60, 0.1, 0.5, seed=9)
        b = gen_ar_change(150, 60, 0.1, 0.5, seed=9)
        assert np.array_equal(a.values, b.values)

    def test_ar2(self):
        ts = gen_ar_change(500, 250, [0.4, -0.2], [0.1, 0.3], seed=4)
        assert ts.n == 500
        assert np.all(np.isfinite(ts.values))


CONFIG_TEXT = """\
# smoke study
phi_pre = 0.1
phi_post = 0.5
noise = gaussian, scaled_t4
reps = 2
alpha = 0.05
seed = 77
k_100 = 30, 50
"""


class TestConfigParsing:
    def test_valid(self):
        cfg = parse_power_config(CONFIG_TEXT, path="inline")
        assert cfg.n_values == (100,)
        assert cfg.k_values[100] == (30, 50)
        assert cfg.noise_kinds == (NoiseModel.GAUSSIAN, NoiseModel.SCALED_T4)
        assert cfg.reps == 2
        assert cfg.seed == 77
        assert cfg.p == 1

    def test_unknown_key_line_number(self):
        with pytest.raises(InputError, match=":2:"):
            parse_power_config("phi_pre = 0.1\nbogus = 3\n", path="cfg")

    def test_bad_number(self):
        with pytest.raises(InputError, match="expected numbers"):
            parse_power_config(CONFIG_TEXT.replace("0.1", "abc"), path="cfg")

    def test_missing_required(self):
        with pytest.raises(InputError, match="phi_post"):
            parse_power_config("phi_pre = 0.1\nnoise = gaussian\nk_100 = 30\n")

    def test_missing_k_entries(self):
        with pytest.raises(InputError, match="k_<n>"):
            parse_power_config("phi_pre = 0.1\nphi_post = 0.5\nnoise = gaussian\n")

    def test_duplicate_key(self):
        with pytest.raises(InputError, match="duplicate"):
            parse_power_config(CONFIG_TEXT + "reps = 3\n")

    def test_k_outside_trim(self):
        with pytest.raises(InputError, match="trimmed range"):
            parse_power_config(CONFIG_TEXT.replace("30, 50", "5, 50"))

    def test_bad_noise_name(self):
        with pytest.raises(InputError, match="unknown noise"):
            parse_power_config(CONFIG_TEXT.replace("scaled_t4", "levy"))


class TestPowerStudy:
    def test_smoke_and_determinism(self):
        cfg = parse_power_config(CONFIG_TEXT)
        t1 = power_study(cfg, jobs=1)
        t2 = power_study(cfg, jobs=2)
        assert t1.to_csv() == t2.to_csv()
        assert set(t1.cells) == {
            (100, 30, "gaussian"), (100, 30, "scaled_t4"),
            (100, 50, "gaussian"), (100, 50, "scaled_t4"),
        }
        for val in t1.cells.values():
            assert 0.0 <= val <= 1.0
        header = t1.to_csv().splitlines()[0]
        assert header == "n,k,noise,power,reps,failures"

    def test_single_rep_cell(self):
        cfg = PowerStudyConfig(
            k_values={100: (50,)},
            phi_pre=(0.1,),
            phi_post=(0.5,),
            noise_kinds=(NoiseModel.GAUSSIAN,),
            reps=1,
            seed=3,
        )
        table = power_study(cfg)
        val = table.cells[(100, 50, "gaussian")]
        assert val in (0.0, 1.0)

    def test_config_validation(self):
        with pytest.raises(InputError):
            PowerStudyConfig(
                k_values={100: (50,)},
                phi_pre=(0.1,),
                phi_post=(0.5,),
                noise_kinds=(NoiseModel.GAUSSIAN,),
                reps=0,
            )


class TestEmpiricalCritvalStudy:
    def test_null_quantiles_near_theory(self):
        study = empirical_critval_study(
            100, 1, NoiseModel.GAUSSIAN, reps=500, levels=(0.05, 0.10), seed=12, jobs=2
        )
        assert study.theoretical[0] == pytest.approx(gumbel_quantile(0.05), abs=1e-12)
        # the paper-level claim: empirical close to theoretical critical values
        assert study.empirical[0] == pytest.approx(2.970195, abs=0.8)
        # quantiles increase as the level decreases
        assert study.empirical[0] > study.empirical[1]

    def test_reps_floor(self):
        with pytest.raises(InputError):
            empirical_critval_study(100, 1, NoiseModel.GAUSSIAN, reps=100, levels=(0.05,))

import pytest

from eemimo.config import (
    ConfigError,
    ExperimentConfig,
    dumps_config,
    load_config,
    loads_config,
    save_config,
    with_overrides,
)
from eemimo.power import HardwareProfile, dbm_to_watt
from eemimo.scenario import PropagationScenario


def test_empty_config_gives_reference_values():
    cfg = loads_config("")
    assert cfg == ExperimentConfig()
    p = cfg.profile
    assert (p.P_FIX, p.B, p.U) == (18.0, 20e6, 1800)
    assert p.noise_power == pytest.approx(dbm_to_watt(-96))
    assert cfg.scenario == PropagationScenario.disc()


def test_units_are_converted():
    cfg = loads_config(
        """
        # hardware
        [profile]
        P_COD = 0.5      # W per Gbit/s
        L_BS = 20        # Gflops/W
        noise = -90
        [scenario]
        dbar_log10 = -3
        """
    )
    assert cfg.profile.P_COD == pytest.approx(0.5e-9)
    assert cfg.profile.L_BS == pytest.approx(20e9)
    assert cfg.profile.noise_power == pytest.approx(1e-12)
    assert cfg.scenario.dbar == pytest.approx(1e-3)


def test_fraction_invariant_names_keys():
    with pytest.raises(ConfigError, match="zeta_ul"):
        loads_config("[profile]\nzeta_ul = 0.4\nzeta_dl = 0.7\n")


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[profile]\nbogus = 1\n", "<string>:2"),
        ("[nowhere]\n", "<string>:1"),
        ("P_FIX = 3\n", "before any section"),
        ("[profile]\nP_FIX 3\n", "<string>:2"),
        ("[profile]\nP_FIX = abc\n", "P_FIX"),
        ("[profile]\nP_FIX = 1\nP_FIX = 2\n", "duplicate"),
        ("[experiment]\nreuse = 3\n", "reuse"),
        ("[scenario]\ngeometry = hexagon\n", "geometry"),
        ("[experiment]\nregime = multicell\n", "square"),
        ("[profile]\nU = 1800.5\n", "U"),
    ],
)
def test_errors_are_located(text, needle):
    with pytest.raises(ConfigError, match=needle):
        loads_config(text)


@pytest.mark.parametrize(
    "cfg",
    [
        ExperimentConfig(),
        ExperimentConfig(
            HardwareProfile(P_FIX=7.3, P_COD=0.123e-9, tau_ul=2.0, Q=5),
            PropagationScenario.square(side=433.0, kappa=3.1),
        ),
    ],
)
def test_round_trip(cfg, tmp_path):
    assert loads_config(dumps_config(cfg)) == cfg
    path = tmp_path / "c.ini"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_kappa_round_trip(tmp_path):
    cfg = loads_config("[scenario]\nkappa = 3.76\n")
    save_config(cfg, tmp_path / "k.ini")
    assert load_config(tmp_path / "k.ini").scenario.kappa == 3.76


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.ini")


def test_overrides():
    cfg = with_overrides(ExperimentConfig(), seed=5, trials=None, regime="multicell")
    assert cfg.experiment.seed == 5 and cfg.experiment.trials == 1000
    assert cfg.scenario.geometry == "square"
    with pytest.raises(ConfigError):
        with_overrides(ExperimentConfig(), reuse=3)
    assert with_overrides(ExperimentConfig()) == ExperimentConfig()

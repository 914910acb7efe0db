import numpy as np
import pytest

from alaam.ee import EEConfig
from alaam.errors import StudyError
from alaam.network import UNDIRECTED
from alaam.studylab import SampleResult, StudyConfig, erdos_renyi, generate_synthetic_attributes, \
    lifestyle_like_dataset, run_study, simulate_outcome, summarize_study, wilson_interval


def pct(interval):
    return tuple(round(100 * v) for v in interval)


def test_wilson_reference_values():
    assert pct(wilson_interval(0, 100)) == (0, 4)
    assert pct(wilson_interval(9, 100)) == (5, 16)
    assert wilson_interval(20, 20)[1] == 1.0
    # symmetric about one half
    lo, hi = wilson_interval(3, 10)
    lo2, hi2 = wilson_interval(7, 10)
    assert lo == pytest.approx(1 - hi2) and hi == pytest.approx(1 - lo2)
    with pytest.raises(ValueError):
        wilson_interval(5, 4)


def test_erdos_renyi_mean_degree():
    net = erdos_renyi(400, 6.0, seed=1)
    assert net.kind == UNDIRECTED
    assert 2 * net.num_edges / 400 == pytest.approx(6.0, rel=0.1)
    assert list(erdos_renyi(50, 3, seed=2).edges()) == list(erdos_renyi(50, 3, seed=2).edges())


def test_synthetic_attributes():
    net = erdos_renyi(31, 3, seed=1)
    attrs = generate_synthetic_attributes(net, seed=4)
    assert attrs.binary["binaryAttribute"].sum() == 15
    assert attrs.continuous["continuousAttribute"].shape == (31,)


def small_config(**kw):
    net = erdos_renyi(30, 3, seed=1)
    attrs = generate_synthetic_attributes(net, seed=2)
    base = dict(sampleCount=3, runsPerSample=2, ee=EEConfig(Ms=100, Mee=5000, burninIters=2000, thinInterval=10),
                seed=5)
    base.update(kw)
    return StudyConfig.from_text(net, attrs, "Density, Contagion, oOb:binaryAttribute", [-1.0, 0.3, 0.5], **base)


def test_null_arm():
    cfg = small_config()
    null = cfg.null_arm("Contagion", {"Density": -0.5})
    assert null.theta == (-0.5, 0.0, 0.5) and null.label == "null_Contagion"
    with pytest.raises(KeyError):
        cfg.null_arm("Activity")


def test_summary_rates():
    cfg = small_config()
    cfg = cfg.null_arm("Contagion")
    results = [SampleResult(0, True, np.array([-1.0, 0.5, 0.6]), np.array([0.1, 0.1, 0.1]), 2),
               SampleResult(1, True, np.array([-1.2, 0.0, 0.4]), np.array([0.1, 0.1, 1.0]), 1),
               SampleResult(2, False, np.full(3, np.nan), np.full(3, np.nan), 0)]
    rep = summarize_study(cfg, results)
    c = rep.row("Contagion")
    assert c.rateName == "FPR" and c.rate == 50.0 and c.samplesConverged == 2
    d = rep.row("Density")
    assert d.rateName == "FNR" and d.rate == 0.0
    assert d.bias == pytest.approx(-0.1) and d.rmse == pytest.approx(np.sqrt(0.02))
    assert d.coverage == 50.0 and d.meanRunsConverged == 1.5
    with pytest.raises(StudyError):
        summarize_study(cfg, results[2:])


def test_run_study_deterministic(tmp_path):
    cfg = small_config()
    a = run_study(cfg)
    b = run_study(cfg)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert [s.index for s in a.samples] == [0, 1, 2]


def test_simulate_outcome_reproducible():
    cfg = small_config()
    m = cfg.model()
    y1 = simulate_outcome(m, np.array(cfg.theta), np.random.default_rng(3), burnin=2000)
    y2 = simulate_outcome(m, np.array(cfg.theta), np.random.default_rng(3), burnin=2000)
    assert y1 == y2


def test_lifestyle_dataset_shape():
    net, attrs, outcome = lifestyle_like_dataset()
    assert net.directed and net.num_nodes == 50
    assert set(np.unique(attrs.continuous["alcohol"])) <= {1.0, 2.0, 3.0, 4.0, 5.0}
    assert outcome.values.shape == (50,)

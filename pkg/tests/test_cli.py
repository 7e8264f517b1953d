import pytest

from api.schemas import SweepRow, TrialRow
from main import main
from services.dataset import VoteScale, load_ratings
from api.export import read_rows
from settings import settings

CONFIG = """
capacity = 8
stability_window = 4
sp_n = 8
overlap_threshold = 8
n_trials = 3
min_target_votes = 8
master_seed = 5
"""


@pytest.fixture
def ratings_file(tmp_path):
    path = tmp_path / "ratings.csv"
    code = main(["gen", "--users", "40", "--items", "30", "--clusters", "2", "--density", "0.6", "--seed", "4", "--out", str(path)])
    assert code == 0
    return path


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(CONFIG, encoding="utf-8")
    return path


def test_gen_writes_a_parseable_table(ratings_file):
    table = load_ratings(ratings_file, VoteScale())
    assert 0 < len(table.users()) <= 40
    assert max(table.items()) <= 30


def test_run_then_stats(ratings_file, config_file, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--ratings", str(ratings_file), "--config", str(config_file), "--out", str(out)]) == 0
    assert len({r.target for r in read_rows(out / "trials.csv", TrialRow)}) == 3

    before = (out / "characteristics.csv").read_bytes()
    assert main(["stats", "--out", str(out)]) == 0
    assert (out / "characteristics.csv").read_bytes() == before


def test_run_json(ratings_file, config_file, tmp_path):
    out = tmp_path / "run"
    args = ["run", "--ratings", str(ratings_file), "--config", str(config_file), "--out", str(out), "--format", "json"]
    assert main(args) == 0
    assert (out / "trials.json").is_file()
    assert main(["stats", "--out", str(out)]) == 0


def test_run_on_the_synthetic_table(monkeypatch, config_file, tmp_path):
    monkeypatch.setattr(settings, "synthetic_users", 40)
    monkeypatch.setattr(settings, "synthetic_items", 30)
    monkeypatch.setattr(settings, "synthetic_density", 0.6)
    out = tmp_path / "run"
    assert main(["run", "--synthetic", "--seed", "2", "--config", str(config_file), "--out", str(out)]) == 0
    assert (out / "pair_tests.csv").is_file()


def test_sweep(ratings_file, config_file, tmp_path):
    out = tmp_path / "sweep"
    args = ["sweep", "--rates", "0.05,0.3", "--ratings", str(ratings_file), "--config", str(config_file), "--out", str(out)]
    assert main(args) == 0
    assert [r.rate for r in read_rows(out / "sweep.csv", SweepRow)] == [0.05, 0.3]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["run", "--out", "x"],
        ["run", "--ratings", "a", "--synthetic", "--out", "x"],
        ["gen", "--users", "many", "--out", "x"],
        ["sweep", "--rates", "fast", "--synthetic", "--out", "x"],
    ],
)
def test_usage_errors_exit_1(argv):
    assert main(argv) == 1


def test_unknown_config_key_exits_1(ratings_file, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("k4 = 1\n", encoding="utf-8")
    assert main(["run", "--ratings", str(ratings_file), "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_bad_ratings_exit_2(config_file, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,1,3\n1,2,9\n", encoding="utf-8")
    assert main(["run", "--ratings", str(bad), "--config", str(config_file), "--out", str(tmp_path / "o")]) == 2


def test_too_few_targets_exit_2(config_file, tmp_path):
    tiny = tmp_path / "tiny.csv"
    tiny.write_text("1,1,3\n1,2,4\n2,1,3\n", encoding="utf-8")
    assert main(["run", "--ratings", str(tiny), "--config", str(config_file), "--out", str(tmp_path / "o")]) == 2


def test_missing_files_exit_3(config_file, tmp_path):
    missing = str(tmp_path / "absent.csv")
    assert main(["run", "--ratings", missing, "--config", str(config_file), "--out", str(tmp_path / "o")]) == 3
    assert main(["stats", "--out", str(tmp_path / "nothing")]) == 3

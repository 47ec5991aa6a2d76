import json
from pathlib import Path

import pandas as pd
import pytest
import torch
from hydra import compose, initialize
from omegaconf import DictConfig

from ..data import DTYPE, load_csv, planted_regions, read_frame
from ..errors import (
    BadJ,
    ConfigError,
    CorruptDocument,
    EmptyFile,
    FoldTooSmall,
    FractionOutOfRange,
    SchemaMismatch,
    UnknownEpic,
    VersionMismatch,
)
from ..interpret import explain_epic_pr
from .commands import (
    cmd_cv_k,
    cmd_evaluate,
    cmd_explain,
    cmd_generate,
    cmd_predict,
    cmd_tradeoff,
    cmd_train,
    choose_k,
)
from .config import validate_config
from .document import load_model, save_model
from .fit import training_set
from .stage import stage

FAST = [
    "model.widths=[8,8]",
    "exp.trainer.epochs=5",
    "exp.trainer.batch_size=32",
    "exp.mlm.m=10",
    "exp.mlm.k_per_layer=2",
    "exp.mlm.n_epics=2",
    "exp.interpret.eta=5",
    "mode=disabled",
    "disable_logs=true",
]


def compose_config(overrides: list[str]) -> DictConfig:
    with initialize(version_base="1.3", config_path="../../configs"):
        return compose(config_name="default", overrides=overrides)


def write_planted(path: Path, n: int, p: int, seed: int, classification: bool = False) -> Path:
    frame, _, _ = planted_regions(n, p, 2, 0.1, torch.Generator().manual_seed(seed))
    if classification:
        frame["y"] = (frame["y"] > frame["y"].median()).astype(int)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def make_config(data_path: Path, out: Path, *overrides: str) -> DictConfig:
    return compose_config(
        FAST
        + [
            f"exp.data.path={data_path}",
            f"exp.interpret.model_path={out / 'model.json'}",
            f"exp.predict.model_path={out / 'model.json'}",
            f"exp.predict.input_path={data_path}",
            f"exp.evaluate.model_path={out / 'model.json'}",
            f"exp.evaluate.input_path={data_path}",
            f"out={out}",
        ]
        + list(overrides)
    )


@pytest.fixture(scope="module")
def trained(tmp_path_factory) -> tuple[DictConfig, Path]:
    root = tmp_path_factory.mktemp("trained")
    data_path = write_planted(root / "planted.csv", 300, 2, seed=0)
    config = make_config(data_path, root / "out")
    cmd_train(config)
    return config, root / "out"


def test_train_products(trained: tuple[DictConfig, Path]):
    _, out = trained
    for name in ["model.json", "train_report.json", "epics.csv", "coefficients.csv"]:
        assert (out / name).exists()

    report = json.loads((out / "train_report.json").read_text())
    assert report["n_possible_cells"] == 4
    assert 1 <= report["n_cells"] <= 4
    assert report["n_epics"] == min(2, report["n_cells"])
    assert sum(report["epic_sizes"]) == report["n_train"] == 240
    assert report["n_test"] == 60
    for split in ["train", "test"]:
        assert set(report["metrics"][split]) == {"mlm-epic", "mlm-epic-hard", "mlm-cell", "lr", "mlp"}
        assert "agreement" in report["metrics"][split]["mlm-epic"]

    epics = pd.read_csv(out / "epics.csv")
    assert epics["size"].tolist() == report["epic_sizes"]


def test_train_deterministic(tmp_path: Path, monkeypatch):
    data_path = write_planted(tmp_path / "planted.csv", 200, 2, seed=1)
    documents = []
    for run in ["a", "b"]:
        (tmp_path / run).mkdir()
        monkeypatch.chdir(tmp_path / run)
        config = make_config(data_path, Path("."))
        cmd_train(config)
        documents.append((tmp_path / run / "model.json").read_bytes())

    assert documents[0] == documents[1]


def test_too_many_epics_clamped(tmp_path: Path, caplog):
    data_path = write_planted(tmp_path / "planted.csv", 200, 2, seed=2)
    config = make_config(data_path, tmp_path, "exp.mlm.n_epics=50")
    document = cmd_train(config)

    assert document.mlm.n_epics == document.partition.n_cells
    assert "EPICs requested" in caplog.text


def test_document_round_trip(trained: tuple[DictConfig, Path], tmp_path: Path):
    _, out = trained
    document = load_model(out / "model.json")
    save_model(document, tmp_path / "copy.json")
    copy = load_model(tmp_path / "copy.json")

    x = 4 * torch.rand((1000, 2), generator=torch.Generator().manual_seed(0), dtype=DTYPE) - 2
    assert torch.equal(document.mlm.predict_soft(x), copy.mlm.predict_soft(x))
    assert torch.equal(document.mlm.predict_hard(x), copy.mlm.predict_hard(x))
    assert torch.equal(document.mlm_cell.predict_soft(x), copy.mlm_cell.predict_soft(x))
    assert (out / "model.json").read_text() == (tmp_path / "copy.json").read_text()


def test_corrupt_documents(trained: tuple[DictConfig, Path], tmp_path: Path):
    _, out = trained
    text = (out / "model.json").read_text()

    truncated = tmp_path / "truncated.json"
    truncated.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptDocument):
        load_model(truncated)

    with pytest.raises(CorruptDocument):
        load_model(tmp_path / "missing.json")

    state = json.loads(text)
    state["format_version"] += 1
    bumped = tmp_path / "bumped.json"
    bumped.write_text(json.dumps(state))
    with pytest.raises(VersionMismatch):
        load_model(bumped)

    del state["format_version"]
    unversioned = tmp_path / "unversioned.json"
    unversioned.write_text(json.dumps(state))
    with pytest.raises(CorruptDocument):
        load_model(unversioned)


def test_predict(trained: tuple[DictConfig, Path], tmp_path: Path):
    config, out = trained
    document = load_model(out / "model.json")
    frame = read_frame(config.exp.data.path)
    x = document.schema.encode(frame).x

    predictions = cmd_predict(config)
    assert (out / "predictions.csv").exists()
    assert predictions.columns.tolist() == ["prediction"]
    assert predictions["prediction"].tolist() == document.mlm.predict_soft(x).tolist()

    shuffled = tmp_path / "shuffled.csv"
    frame[["y", "x2", "x1"]].to_csv(shuffled, index=False)
    config.exp.predict.input_path = str(shuffled)
    assert cmd_predict(config)["prediction"].tolist() == predictions["prediction"].tolist()

    config.exp.predict.input_path = str(config.exp.data.path)
    config.exp.predict.mode = "hard"
    config.exp.predict.gammas = True
    hard = cmd_predict(config)
    assert hard.columns.tolist() == ["prediction"] + [
        f"gamma_{j}" for j in range(document.mlm.n_epics)
    ]
    gammas = torch.tensor(hard.filter(like="gamma_").values, dtype=DTYPE)
    certain = gammas.max(dim=1).values == 1
    assert torch.allclose(
        torch.tensor(hard["prediction"].values)[certain],
        torch.tensor(predictions["prediction"].values)[certain],
        rtol=0,
        atol=1e-12,
    )

    config.exp.predict.mode = "soft"
    config.exp.predict.gammas = False


def test_predict_schema_mismatch(trained: tuple[DictConfig, Path], tmp_path: Path):
    config, _ = trained
    frame = read_frame(config.exp.data.path)
    broken = tmp_path / "broken.csv"
    frame[["x1", "y"]].assign(x3="1").to_csv(broken, index=False)

    config.exp.predict.input_path = str(broken)
    with pytest.raises(SchemaMismatch) as error:
        cmd_predict(config)
    assert error.value.missing == ["x2"]
    assert error.value.extra == ["x3"]
    assert error.value.stage == "data"
    config.exp.predict.input_path = str(config.exp.data.path)


def test_predict_to_stdout(trained: tuple[DictConfig, Path], capsys):
    config, _ = trained
    config.exp.predict.output = "-"
    predictions = cmd_predict(config)
    config.exp.predict.output = "predictions.csv"

    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "prediction"
    assert len(lines) == len(predictions) + 1


def test_evaluate(trained: tuple[DictConfig, Path]):
    config, out = trained
    report = cmd_evaluate(config)

    assert report == json.loads((out / "evaluate.json").read_text())
    assert report["train"] == load_model(out / "model.json").metrics["train"]
    assert set(report["test"]["mlm-epic"]) == {"rmse", "agreement"}


def test_explain_lds(trained: tuple[DictConfig, Path]):
    config, out = trained
    config.exp.interpret.method = "lds"
    report = cmd_explain(config)

    saved = json.loads((out / "lds.json").read_text())
    assert saved["trivial"] == report["trivial"]
    assert [epic["dims"] for epic in saved["epics"]] == [epic["dims"] for epic in report["epics"]]
    assert (out / "coefficients.svg").exists()
    assert (out / "coefficients.csv").exists()
    n_epics = load_model(out / "model.json").mlm.n_epics
    if n_epics == 1:
        assert report["trivial"]
        return

    assert [epic["epic"] for epic in report["epics"]] == list(range(n_epics))
    for epic in report["epics"]:
        assert epic["names"] == [["x1", "x2"][dim] for dim in epic["dims"]]
        if epic["found"]:
            assert (out / f"lds_epic_{epic['epic']}.csv").exists()
            assert (out / f"lds_epic_{epic['epic']}.svg").exists()


def test_explain_pr(trained: tuple[DictConfig, Path]):
    config, out = trained
    config.exp.interpret.method = "pr"
    report = cmd_explain(config)
    config.exp.interpret.method = "lds"

    document = load_model(out / "model.json")
    train = training_set(document)
    for epic in report["epics"]:
        conditions = explain_epic_pr(
            document.mlm, train, epic["epic"], config.exp.interpret.psi, config.exp.interpret.eta
        )
        assert [condition["covered"] for condition in epic["conditions"]] == [
            condition.covered for condition in conditions
        ]
    assert (out / "pr.txt").read_text().startswith("EPIC 0")


def test_explain_unknown_epic(trained: tuple[DictConfig, Path]):
    config, _ = trained
    config.exp.interpret.epic = 99
    with pytest.raises(UnknownEpic) as error:
        cmd_explain(config)
    assert error.value.stage == "explain"
    config.exp.interpret.epic = "all"


def test_explain_single_epic(tmp_path: Path):
    data_path = write_planted(tmp_path / "planted.csv", 200, 2, seed=3)
    config = make_config(data_path, tmp_path, "exp.mlm.n_epics=1")
    cmd_train(config)

    report = cmd_explain(config)
    assert report["trivial"]
    assert report["epics"] == []


def test_classification(tmp_path: Path):
    data_path = write_planted(tmp_path / "planted.csv", 300, 2, seed=4, classification=True)
    config = make_config(
        data_path, tmp_path, "exp.data.task=classification", "exp.mlm.lasso_alpha=0.2"
    )
    document = cmd_train(config)

    assert set(document.metrics["test"]["mlm-epic"]) == {"auc", "f1", "accuracy", "agreement"}
    predictions = cmd_predict(config)
    assert predictions.columns.tolist() == ["probability", "label"]
    assert predictions["probability"].between(0, 1).all()
    assert (predictions["label"] == (predictions["probability"] >= 0.5)).all()


@pytest.mark.parametrize("grid", [[1], [1, 2]])
def test_cv_k(tmp_path: Path, grid: list[int]):
    data_path = write_planted(tmp_path / "planted.csv", 200, 2, seed=5)
    overrides = [f"exp.cv.grid=[{','.join(map(str, grid))}]", "exp.cv.folds=2"]
    config = make_config(data_path, tmp_path, *overrides)
    result = cmd_cv_k(config)

    assert result["k"] in grid
    assert len(result["table"]) == len(grid)
    table = pd.read_csv(tmp_path / "cv.csv")
    assert table["k"].tolist() == grid
    assert table.columns.tolist() == ["k", "metric", "mean", "fold_0", "fold_1"]
    if grid == [1]:
        assert result["k"] == 1


@pytest.mark.parametrize(
    "ks, means, task, expected",
    [
        ([1, 2, 3], [0.5, 0.3, 0.3], "regression", 2),
        ([1, 2, 3], [0.7, 0.9, 0.9], "classification", 2),
        ([1, 2], [float("nan"), 0.6], "classification", 2),
        ([4], [float("nan")], "classification", 4),
    ],
)
def test_choose_k(ks: list[int], means: list[float], task: str, expected: int):
    table = pd.DataFrame({"k": ks, "mean": means})
    assert choose_k(table, task) == expected


def test_tradeoff(tmp_path: Path):
    data_path = write_planted(tmp_path / "planted.csv", 200, 2, seed=6)
    config = make_config(
        data_path, tmp_path, "exp.tradeoff.k_grid=[1,2]", "exp.tradeoff.j_grid=[1,2]"
    )
    frame = cmd_tradeoff(config)

    assert frame["predictor"].tolist() == ["mlm-cell", "mlm-cell", "mlm-epic", "mlm-epic"]
    assert frame["k_per_layer"].tolist()[:2] == [1, 2]
    assert frame["n_cells"][0] == 1
    assert frame["n_epics"][2] == 1
    assert {"train_rmse", "test_rmse", "train_agreement", "test_agreement"} <= set(frame.columns)

    sizes = json.loads((tmp_path / "epic_sizes.json").read_text())
    assert sizes["1"] == [160]
    assert sum(sizes["2"]) == 160


def test_generate(tmp_path: Path):
    output = tmp_path / "generated.csv"
    config = compose_config(
        FAST + [f"exp.generate.output={output}", "exp.generate.n=50", "exp.generate.p=3"]
    )
    cmd_generate(config)

    dataset = load_csv(output, "y", "regression")
    assert dataset.n == 50
    assert dataset.feature_names == ["x1", "x2", "x3"]

    planted = json.loads(output.with_suffix(".json").read_text())
    assert len(planted["coefficients"]) == 2
    assert len(planted["coefficients"][0]) == 4
    assert len(planted["regions"]) == 50

    again = tmp_path / "again.csv"
    config.exp.generate.output = str(again)
    cmd_generate(config)
    assert output.read_text() == again.read_text()


@pytest.mark.parametrize(
    "override, error",
    [
        ("command=fit", ConfigError),
        ("exp.mlm.n_epics=0", BadJ),
        ("exp.cv.folds=1", FoldTooSmall),
        ("exp.data.test_fraction=1.0", FractionOutOfRange),
        ("exp.interpret.xi=1.0", ConfigError),
        ("exp.interpret.psi=0.0", ConfigError),
        ("exp.mlm.epsilon=-0.1", ConfigError),
        ("exp.mlm.cov_kind=tied", ConfigError),
        ("model.widths=[]", ConfigError),
        ("exp.predict.mode=average", ConfigError),
        ("exp.cv.grid=[]", ConfigError),
        ("exp.generate.p=1", None),
        ("exp.mlm.m=0", None),
        (["exp.data.task=classification", "exp.mlm.lasso_alpha=0.0"], ConfigError),
        (["exp.data.task=classification", "exp.mlm.lasso_alpha=0.2"], None),
    ],
)
def test_validate_config(override: str | list[str], error: type | None):
    config = compose_config([override] if isinstance(override, str) else override)
    if error is None:
        validate_config(config)
        return

    with pytest.raises(error):
        validate_config(config)


def test_default_configs_are_valid():
    for exp in ["synthetic", "bike", "calhousing", "kirc"]:
        for model in ["small", "medium", "large"]:
            validate_config(compose_config([f"exp={exp}", f"model={model}"]))


def test_stage_tags_errors():
    with pytest.raises(EmptyFile) as error:
        with stage("outer"):
            with stage("inner"):
                raise EmptyFile("nothing to read")

    assert error.value.stage == "inner"
    assert str(error.value) == "[inner] nothing to read"
    assert error.value.exit_code == 3

import ast
from pathlib import Path

import pytest

import rgbt_tracker
from rgbt_tracker import config
from rgbt_tracker.config import RunConfig
from rgbt_tracker.errors import ConfigError

SRC = Path(rgbt_tracker.__file__).parent

PUBLISHED = {
    "LEARNING_RATE": 5e-5,
    "BATCH_SIZE": 20,
    "EPOCHS": 50,
    "MAX_CENTER_DISTANCE": 25.0,
    "MIN_OVERLAP": 0.3,
    "PRECISION_THRESHOLD_PX": 5.0,
    "SUCCESS_THRESHOLD": 0.6,
}

RUNCONFIG_FIELDS = {
    "learning_rate": "LEARNING_RATE",
    "batch_size": "BATCH_SIZE",
    "epochs": "EPOCHS",
    "max_center_distance": "MAX_CENTER_DISTANCE",
    "min_overlap": "MIN_OVERLAP",
    "precision_threshold": "PRECISION_THRESHOLD_PX",
    "success_threshold": "SUCCESS_THRESHOLD",
}


def _trees():
    return {p: ast.parse(p.read_text()) for p in SRC.rglob("*.py")}


def test_published_constants_values():
    for name, value in PUBLISHED.items():
        assert getattr(config, name) == value


def test_published_constants_assigned_once():
    counts = dict.fromkeys(PUBLISHED, 0)
    for path, tree in _trees().items():
        for node in ast.walk(tree):
            if isinstance(node, ast.Assign):
                for target in node.targets:
                    if isinstance(target, ast.Name) and target.id in counts:
                        counts[target.id] += 1
                        assert path.name == "config.py"
    assert counts == dict.fromkeys(PUBLISHED, 1)


@pytest.mark.parametrize("value", [5e-5, 25.0])
def test_distinctive_literals_appear_once(value):
    hits = []
    for path, tree in _trees().items():
        for node in ast.walk(tree):
            if isinstance(node, ast.Constant) and type(node.value) in (int, float) \
                    and node.value == value:
                hits.append(path.name)
    assert hits == ["config.py"]


def test_run_config_defaults_reference_the_constants():
    tree = ast.parse((SRC / "config.py").read_text())
    cls = next(n for n in tree.body if isinstance(n, ast.ClassDef) and n.name == "RunConfig")
    defaults = {n.target.id: n.value for n in cls.body if isinstance(n, ast.AnnAssign)}
    for field_name, const in RUNCONFIG_FIELDS.items():
        assert isinstance(defaults[field_name], ast.Name) and defaults[field_name].id == const


def test_dump_and_parse_roundtrip(tmp_path):
    cfg = RunConfig.desk_scale(seed=7, lam=2.5, use_global_attention=False)
    path = tmp_path / "run.cfg"
    cfg.save(path)
    assert RunConfig.load(path) == cfg


def test_parse_features():
    text = """
    # comment line
    lambda = 3        # alias
    use_global_attention = off
    conv_channels = 8, 16,32
    mask_polarity = target_low
    """
    cfg = RunConfig.loads(text)
    assert cfg.lam == 3.0 and not cfg.use_global_attention
    assert cfg.conv_channels == (8, 16, 32)
    assert cfg.mask_polarity == "target_low"
    base = RunConfig.desk_scale()
    assert RunConfig.loads("seed = 4", base=base) == base.replace(seed=4)


@pytest.mark.parametrize("text", ["bogus = 1", "seed = x", "use_local_attention = maybe",
                                  "no equals sign", "lam = -1", "mask_polarity = sideways"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        RunConfig.loads(text)


def test_variants_and_effective_lambda():
    cfg = RunConfig()
    assert cfg.variant == "local+global" and cfg.effective_lambda == 1.0
    local = cfg.replace(use_global_attention=False)
    assert local.variant == "local"
    base = local.replace(use_local_attention=False)
    assert base.variant == "baseline" and base.effective_lambda == 0.0
    assert cfg.replace(lam=0.0).variant == "global"
    assert base.loss_config().lam == 0.0


def test_sub_configs():
    cfg = RunConfig()
    assert cfg.filter_config().max_center_distance == 25.0
    assert cfg.filter_config().min_overlap == 0.3
    assert cfg.proposal_config().count == 256
    assert cfg.network_config().conv_channels == (96, 256, 512)
    assert cfg.loss_config().batch_size == 20


def test_print_defaults_lists_every_field():
    text = RunConfig().dumps()
    names = [line.split("=")[0].strip() for line in text.splitlines()]
    assert names == [f for f in RunConfig.__dataclass_fields__]
    assert "learning_rate = 5e-05" in text

import json
import shutil

import pytest

from gahmm.bankio import loads_banks
from gahmm.cli import main
from gahmm.config import ConfigError, parse_config


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def cascade_bank(tmp_path, data_dir, capsys):
    bank = tmp_path / "cascade.bank"
    assert run(capsys, "train", "--config", data_dir / "cascade.toml", "--out", bank)[0] == 0
    return bank


@pytest.fixture
def scenario_bank(tmp_path, data_dir, capsys):
    bank = tmp_path / "scenario.bank"
    assert run(capsys, "train", "--config", data_dir / "scenario.toml", "--out", bank)[0] == 0
    return bank


def test_train_table1(tmp_path, data_dir, capsys):
    bank = tmp_path / "t1.bank"
    code, _, err = run(capsys, "train", "--catalog", data_dir / "table1.onto", "--out", bank)
    assert code == 0 and "6 labels" in err
    (b,), _ = loads_banks(bank.read_text())
    assert set(b.labels) == {"Placing Object on floor", "Loading-1", "Object_Dropped", "Unloading-1",
                             "Object_exchange-1", "Social_interaction"}


def test_train_empty_catalog(tmp_path, capsys):
    empty = tmp_path / "empty.onto"
    empty.write_text("# no rules\n")
    code, _, err = run(capsys, "train", "--catalog", empty, "--out", tmp_path / "x.bank")
    assert code == 2 and "empty catalog" in err
    assert not (tmp_path / "x.bank").exists()


def test_train_is_deterministic(tmp_path, data_dir, capsys):
    a, b = tmp_path / "a.bank", tmp_path / "b.bank"
    for out in (a, b):
        run(capsys, "train", "--catalog", data_dir / "table1.onto", data_dir / "scenario.onto", "--out", out)
    assert a.read_bytes() == b.read_bytes()


def test_recognize_cascade(cascade_bank, data_dir, capsys):
    code, out, _ = run(capsys, "recognize", "--events", data_dir / "cabinet_cascade.txt",
                       "--bank", cascade_bank, "--config", data_dir / "cascade.toml")
    assert code == 0
    messages = [json.loads(line) for line in out.splitlines()]
    assert [m["activity"] for m in messages] == ["Object_taken_cabinet", "Unloading"]
    assert messages[-1]["span"] == [0, 5]
    assert list(messages[0]) == ["activity", "token", "participants", "objects", "span", "time_span",
                                 "confidence", "log_likelihood", "layer", "architecture", "context",
                                 "kind", "provenance"]


def test_recognize_scenario(scenario_bank, data_dir, capsys):
    code, out, _ = run(capsys, "recognize", "--events", data_dir / "group_exchanging_boxes.txt",
                       "--bank", scenario_bank, "--config", data_dir / "scenario.toml")
    assert code == 0
    messages = [json.loads(line) for line in out.splitlines()]
    social = [m for m in messages if m["activity"] == "Social_Interaction" and m["context"] == "H2"]
    assert social and set(social[0]["participants"]) == {"H2", "H3"}
    assert any(m["activity"].startswith("Object_exchange") for m in messages)
    spans = [m["span"] for m in messages]
    assert spans == sorted(spans)
    for m in messages:
        assert 0 < m["confidence"] <= 1


def test_participants_are_union_of_sources(scenario_bank, data_dir, capsys, scenario_events, scenario_config):
    from gahmm.bankio import loads_banks as lb
    from gahmm.cli import recognize
    from gahmm.messages import to_message
    banks, _ = lb(scenario_bank.read_text())
    stack = scenario_config.build_stack(banks)
    for r in recognize(scenario_events, scenario_config, stack):
        msg = to_message(r, scenario_events)
        expected = []
        for i in r.sources:
            expected += [x for x in scenario_events[i].entity_ids if x not in expected]
        assert list(msg.participants) == expected
        assert r.span[0] <= min(r.sources) and max(r.sources) < r.span[1] <= len(scenario_events)


def test_recognize_empty_events(cascade_bank, data_dir, tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    code, out, _ = run(capsys, "recognize", "--events", empty, "--bank", cascade_bank,
                       "--config", data_dir / "cascade.toml")
    assert code == 0 and out == ""


def test_recognize_vocab_mismatch(tmp_path, data_dir, capsys):
    bank = tmp_path / "t1.bank"
    run(capsys, "train", "--catalog", data_dir / "table1.onto", "--out", bank)
    code, _, err = run(capsys, "recognize", "--events", data_dir / "cabinet_cascade.txt", "--bank", bank,
                       "--config", data_dir / "cascade.toml")
    assert code == 3 and "vocabulary hash mismatch" in err


def test_recognize_bad_events(cascade_bank, data_dir, tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0\tWalking\t1.5\n")
    code, _, err = run(capsys, "recognize", "--events", bad, "--bank", cascade_bank,
                       "--config", data_dir / "cascade.toml")
    assert code == 2 and "confidence" in err
    code, _, _ = run(capsys, "recognize", "--events", tmp_path / "missing.txt", "--bank", cascade_bank,
                     "--config", data_dir / "cascade.toml")
    assert code == 2


def test_bad_config(cascade_bank, data_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('architecture = "Q"\n[[layer]]\ncatalogs = []\n')
    code, _, _ = run(capsys, "recognize", "--events", data_dir / "cabinet_cascade.txt", "--bank",
                     cascade_bank, "--config", cfg)
    assert code == 3


def test_table_output(cascade_bank, data_dir, tmp_path, capsys):
    cfg = tmp_path / "table.toml"
    for name in ("ontology_x1.onto", "ontology_x2.onto"):
        shutil.copy(data_dir / name, tmp_path / name)
    cfg.write_text((data_dir / "cascade.toml").read_text().replace('alpha = 0.1', 'alpha = 0.1\noutput = "table"'))
    code, out, _ = run(capsys, "recognize", "--events", data_dir / "cabinet_cascade.txt", "--bank",
                       cascade_bank, "--config", cfg)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("span\t") and lines[-1].split("\t")[4] == "Unloading"


def test_explain_cascade(cascade_bank, data_dir, capsys):
    code, out, _ = run(capsys, "explain", "--events", data_dir / "cabinet_cascade.txt",
                       "--bank", cascade_bank, "--config", data_dir / "cascade.toml")
    assert code == 0
    assert "layer 0 input (5):" in out
    assert "stream (3): Object_taken_cabinet, Object_Carrying, Walking" in out
    assert "stream (1): Unloading" in out
    assert "scores: Object_taken_cabinet=" in out


def _write_config(tmp_path, data_dir, body):
    for name in ("table1.onto",):
        shutil.copy(data_dir / name, tmp_path / name)
    cfg = tmp_path / "run.toml"
    cfg.write_text(body)
    return cfg


def test_explain_low_confidence(tmp_path, data_dir, capsys):
    cfg = _write_config(tmp_path, data_dir,
                        'architecture = "N"\n[[layer]]\ncatalogs = ["table1.onto"]\nconfidence_floor = 0.5\n')
    bank = tmp_path / "b.bank"
    run(capsys, "train", "--config", cfg, "--out", bank)
    events = tmp_path / "ev.txt"
    events.write_text("0\tGroup_Merging\t0.9\n1\tGroup_United\t0.3\n2\tGroup_Shaking_hands\t1.0\n3\tWalking\n")
    code, out, _ = run(capsys, "explain", "--events", events, "--bank", bank, "--config", cfg)
    assert code == 0
    assert "removed Group_United (confidence 0.3 < 0.5)" in out


def test_explain_flooring_unconsumed(tmp_path, data_dir, capsys):
    cfg = _write_config(tmp_path, data_dir,
                        'architecture = "N"\n[[layer]]\ncatalogs = ["table1.onto"]\nwindow = "flooring"\n')
    bank = tmp_path / "b.bank"
    run(capsys, "train", "--config", cfg, "--out", bank)
    events = tmp_path / "ev.txt"
    events.write_text("[" + ",".join(f"e{i}" for i in range(11)) + "]")
    code, out, _ = run(capsys, "explain", "--events", events, "--bank", bank, "--config", cfg)
    assert code == 0
    assert "case=flooring n=11 w=3 count=3 unconsumed=2" in out
    assert out.count("    window [") == 3


def test_explain_sliding_count(tmp_path, data_dir, capsys):
    cfg = _write_config(tmp_path, data_dir, 'architecture = "N"\n[[layer]]\ncatalogs = ["table1.onto"]\n')
    bank = tmp_path / "b.bank"
    run(capsys, "train", "--config", cfg, "--out", bank)
    events = tmp_path / "ev.txt"
    events.write_text("[" + ",".join(f"e{i}" for i in range(11)) + "]")
    _, out, _ = run(capsys, "explain", "--events", events, "--bank", bank, "--config", cfg)
    assert "count=9" in out and out.count("    window [") == 9


def test_fuse_option(tmp_path, data_dir, capsys):
    for name in ("table1.onto", "scenario.onto"):
        shutil.copy(data_dir / name, tmp_path / name)
    cfg = tmp_path / "fuse.toml"
    cfg.write_text((data_dir / "scenario.toml").read_text().replace('alpha = 0.1', 'alpha = 0.1\nfuse = true'))
    bank = tmp_path / "b.bank"
    run(capsys, "train", "--config", cfg, "--out", bank)
    code, out, _ = run(capsys, "recognize", "--events", data_dir / "group_exchanging_boxes.txt",
                       "--bank", bank, "--config", cfg)
    messages = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and sorted(m["context"] for m in messages) == ["H1", "H2", "H3"]


def test_parse_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config("not toml [")
    with pytest.raises(ConfigError, match="unknown"):
        parse_config('bogus = 1\n[[layer]]\ncatalogs = ["x"]\n')
    with pytest.raises(ConfigError, match="not found"):
        parse_config('[[layer]]\ncatalogs = ["nope.onto"]\n', tmp_path)
    with pytest.raises(ConfigError, match="no"):
        parse_config('architecture = "C"\n')

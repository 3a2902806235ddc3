"""Command-line front end: ingestion, configs, commands, exit codes."""

import csv
import json

import numpy as np
import pytest
import yaml

from sepsign import (
    Chain,
    InferenceError,
    DataError,
    ModelSpec,
    NetworkPanel,
    NodeSet,
    SignedNetwork,
    StatisticSpec,
    cli,
    io as sio,
)

EDGES_SIGN = ModelSpec.sign([StatisticSpec("edges+")])

TOY_PANEL = """time,node_a,node_b,sign
t1,a,b,+1
t1,b,c,-1
t1,c,d,+1
t1,a,e,-1
t2,a,b,+1
t2,b,c,+1
t2,d,e,-1
t2,a,e,-1
"""


def write(path, text):
    path.write_text(text)
    return str(path)


def write_config(path, mapping):
    path.write_text(yaml.safe_dump(mapping))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def error_payload(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])["error"]


# ---------------------------------------------------------------------------
# panel and attribute ingestion


def test_read_panel_two_slice_toy(tmp_path):
    panel = sio.read_panel(write(tmp_path / "p.csv", TOY_PANEL))
    assert panel.n_transitions == 1
    assert panel.times == ("t1", "t2")
    assert panel.nodes.labels == ("a", "b", "c", "d", "e")
    assert panel.waves[0].sign("b", "c") == -1
    assert panel.waves[1].sign("b", "c") == 1
    assert panel.waves[0].sign("d", "e") == 0


def test_read_panel_tab_delimited(tmp_path):
    text = TOY_PANEL.replace(",", "\t")
    panel = sio.read_panel(write(tmp_path / "p.tsv", text))
    assert panel.n_waves == 2 and panel.waves[1].n_edges == 4


def test_read_panel_wave_ordering(tmp_path):
    base = ("time,node_a,node_b,sign\n"
            "t10,a,b,+1\n"
            "t2,a,b,-1\n")
    panel = sio.read_panel(write(tmp_path / "lex.csv", base))
    assert panel.times == ("t10", "t2")  # lexicographic by default

    ordered = ("time,node_a,node_b,sign,order\n"
               "t10,a,b,+1,2\n"
               "t2,a,b,-1,1\n")
    panel = sio.read_panel(write(tmp_path / "ord.csv", ordered))
    assert panel.times == ("t2", "t10")  # numeric order column wins


def test_read_panel_duplicate_dyad_names_line(tmp_path):
    text = ("time,node_a,node_b,sign\n"
            "t1,a,b,+1\n"
            "t1,c,d,+1\n"
            "t1,b,a,-1\n"
            "t2,a,b,+1\n")
    with pytest.raises(DataError, match=r":4:.*duplicate dyad"):
        sio.read_panel(write(tmp_path / "dup.csv", text))


def test_read_panel_value_errors(tmp_path):
    bad_sign = "time,node_a,node_b,sign\nt1,a,b,0\nt2,a,b,+1\n"
    with pytest.raises(DataError, match=r":2:.*sign"):
        sio.read_panel(write(tmp_path / "s.csv", bad_sign))
    loop = "time,node_a,node_b,sign\nt1,a,a,+1\nt2,a,b,+1\n"
    with pytest.raises(DataError, match=r":2:.*self-loop"):
        sio.read_panel(write(tmp_path / "l.csv", loop))
    with pytest.raises(DataError, match="header"):
        sio.read_panel(write(tmp_path / "h.csv", "a,b,c\n1,2,3\n"))


def test_read_panel_single_slice_rejected(tmp_path):
    text = "time,node_a,node_b,sign\nt1,a,b,+1\nt1,b,c,-1\n"
    with pytest.raises(DataError, match="at least 2"):
        sio.read_panel(write(tmp_path / "one.csv", text))


def test_read_panel_against_attribute_universe(tmp_path):
    attrs = write(tmp_path / "a.csv",
                  "node,attr,value\nb,party,r\na,party,d\nc,party,d\n")
    nodes = sio.read_attributes(attrs)
    assert nodes.labels == ("b", "a", "c")  # file order defines the universe
    assert nodes.attributes["party"] == ("r", "d", "d")
    panel_text = "time,node_a,node_b,sign\nt1,a,b,+1\nt2,a,z,+1\n"
    with pytest.raises(DataError, match=r":3:.*'z'"):
        sio.read_panel(write(tmp_path / "p.csv", panel_text), attrs)


def test_read_attributes_errors(tmp_path):
    dup = ("node,attr,value\n"
           "a,party,r\n"
           "a,party,d\n")
    with pytest.raises(DataError, match=r":3:.*line 2"):
        sio.read_attributes(write(tmp_path / "dup.csv", dup))
    missing = ("node,attr,value\n"
               "a,party,r\n"
               "b,age,3\n")
    with pytest.raises(DataError, match="missing"):
        sio.read_attributes(write(tmp_path / "m.csv", missing))


def test_read_dyad_covariate(tmp_path):
    nodes = NodeSet(["a", "b", "c"])
    good = write(tmp_path / "w.csv", "node_a,node_b,value\na,b,1.5\nb,c,-2\n")
    mat = sio.read_dyad_covariate(good, nodes)
    assert mat[0, 1] == mat[1, 0] == 1.5
    assert mat[1, 2] == mat[2, 1] == -2.0
    assert mat[0, 2] == 0.0
    dup = write(tmp_path / "d.csv", "node_a,node_b,value\na,b,1\nb,a,2\n")
    with pytest.raises(DataError, match=r":3:.*duplicate"):
        sio.read_dyad_covariate(dup, nodes)
    unknown = write(tmp_path / "u.csv", "node_a,node_b,value\na,z,1\n")
    with pytest.raises(DataError, match="unknown node"):
        sio.read_dyad_covariate(unknown, nodes)
    text = write(tmp_path / "t.csv", "node_a,node_b,value\na,b,high\n")
    with pytest.raises(DataError, match="numeric"):
        sio.read_dyad_covariate(text, nodes)


def test_panel_report_values(tmp_path):
    panel = sio.read_panel(write(tmp_path / "p.csv", TOY_PANEL))
    rows = sio.panel_report(panel)
    assert rows[0]["nodes"] == 5 and rows[0]["edges"] == 4
    assert rows[0]["density"] == pytest.approx(0.4)
    assert rows[0]["positive_fraction"] == pytest.approx(0.5)
    assert rows[1]["positive_fraction"] == pytest.approx(0.5)


def test_chain_round_trip_both_layouts(tmp_path):
    rng = np.random.default_rng(3)
    chain = Chain("sign", ("F:edges+", "P:edges+"),
                  rng.standard_normal((40, 2)), 0.31, 9,
                  {"iterations": 40}, EDGES_SIGN)
    for wide in (False, True):
        path = tmp_path / f"chain{int(wide)}.csv"
        sio.write_chain(chain, path, wide=wide)
        back = sio.read_chain(path)
        assert back.kind == "sign" and back.labels == chain.labels
        assert np.array_equal(back.draws, chain.draws)  # repr round trip
        assert back.acceptance_rate == chain.acceptance_rate
        assert back.seed == 9 and back.config == {"iterations": 40}
        assert back.model.names() == chain.model.names()
    (tmp_path / "chain0.meta.json").unlink()
    with pytest.raises(DataError, match="cannot read"):
        sio.read_chain(tmp_path / "chain0.csv")


# ---------------------------------------------------------------------------
# simulate command


def test_simulate_preset_two_wave_panel(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml",
                       {"simulate": {"preset": "sim-study",
                                     "aux": {"iterations": 2000}}})
    out = tmp_path / "out"
    rc = cli.main(["simulate", "--config", cfg, "--seed", "11",
                   "--out", str(out)])
    assert rc == 0
    assert "panel.csv" in capsys.readouterr().out
    panel = sio.read_panel(out / "panel.csv")
    assert panel.n_waves == 2
    assert panel.nodes.n == 40
    report = read_rows(out / "report.csv")
    assert len(report) == 2
    assert all(r["nodes"] == "40" for r in report)


def test_simulate_seed_repeat_identical_files(tmp_path):
    cfg = write_config(tmp_path / "c.yaml",
                       {"simulate": {"preset": "sim-study", "nodes": 12,
                                     "aux": {"iterations": 1500}}})
    outs = [tmp_path / f"o{i}" for i in range(3)]
    for out, seed in zip(outs, ("5", "5", "6")):
        assert cli.main(["simulate", "--config", cfg, "--seed", seed,
                         "--out", str(out)]) == 0
    first = (outs[0] / "panel.csv").read_bytes()
    assert first == (outs[1] / "panel.csv").read_bytes()
    assert first != (outs[2] / "panel.csv").read_bytes()


def test_simulate_frozen_dynamics_constant_panel(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", {"simulate": {
        "nodes": 8,
        "transitions": 2,
        "initial": {"density": 0.5, "positive_prob": 0.5},
        "interaction_step": {"kind": "frozen"},
    }})
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", cfg, "--seed", "3",
                     "--out", str(out)]) == 0
    panel = sio.read_panel(out / "panel.csv")
    assert panel.n_waves == 3
    for wave in panel.waves[1:]:
        assert np.array_equal(wave.state, panel.waves[0].state)


def test_simulate_round_trip_is_lossless(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", {"simulate": {
        "nodes": 9,
        "transitions": 1,
        "initial": {"density": 0.4, "positive_prob": 0.5},
        "interaction_step": {"kind": "tergm", "density": -1.0, "change": -1.0},
        "sign_step": {"terms": ["edges+"], "zeta_F": [0.3], "zeta_P": [0.0]},
        "aux": {"iterations": 1500},
    }})
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", cfg, "--seed", "21",
                     "--out", str(out)]) == 0
    panel = sio.read_panel(out / "panel.csv")
    sio.write_panel(panel, out / "again.csv")
    assert (out / "again.csv").read_bytes() == (out / "panel.csv").read_bytes()


def test_simulate_requires_sign_step_unless_frozen(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", {"simulate": {
        "nodes": 6,
        "transitions": 1,
        "initial": {"density": 0.4},
        "interaction_step": {"kind": "tergm", "density": -1.0, "change": 0.0},
    }})
    rc = cli.main(["simulate", "--config", cfg, "--seed", "1",
                   "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "sign_step" in error_payload(capsys)["message"]


# ---------------------------------------------------------------------------
# seed and output resolution


def test_env_overrides_and_flag_precedence(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.yaml", {"simulate": {
        "preset": "sim-study", "nodes": 10, "aux": {"iterations": 1000}}})
    ref = tmp_path / "ref"
    assert cli.main(["simulate", "--config", cfg, "--seed", "7",
                     "--out", str(ref)]) == 0

    env_out = tmp_path / "env_out"
    monkeypatch.setenv(cli.ENV_SEED, "7")
    monkeypatch.setenv(cli.ENV_OUT, str(env_out))
    assert cli.main(["simulate", "--config", cfg]) == 0
    assert (env_out / "panel.csv").read_bytes() == \
        (ref / "panel.csv").read_bytes()

    flag_out = tmp_path / "flag_out"
    ref9 = tmp_path / "ref9"
    monkeypatch.setenv(cli.ENV_SEED, "8")
    assert cli.main(["simulate", "--config", cfg, "--seed", "9",
                     "--out", str(flag_out)]) == 0
    monkeypatch.delenv(cli.ENV_SEED)
    assert cli.main(["simulate", "--config", cfg, "--seed", "9",
                     "--out", str(ref9)]) == 0
    assert (flag_out / "panel.csv").read_bytes() == \
        (ref9 / "panel.csv").read_bytes()  # the flag beat the environment


def test_config_seed_used_and_missing_seed_fails(tmp_path, monkeypatch,
                                                 capsys):
    monkeypatch.delenv(cli.ENV_SEED, raising=False)
    monkeypatch.delenv(cli.ENV_OUT, raising=False)
    base = {"simulate": {"preset": "sim-study", "nodes": 10,
                         "aux": {"iterations": 1000}}}
    cfg_seeded = write_config(tmp_path / "s.yaml", dict(base, seed=7))
    out = tmp_path / "cfg_out"
    assert cli.main(["simulate", "--config", cfg_seeded,
                     "--out", str(out)]) == 0
    ref = tmp_path / "ref"
    cfg_plain = write_config(tmp_path / "p.yaml", base)
    assert cli.main(["simulate", "--config", cfg_plain, "--seed", "7",
                     "--out", str(ref)]) == 0
    assert (out / "panel.csv").read_bytes() == (ref / "panel.csv").read_bytes()

    rc = cli.main(["simulate", "--config", cfg_plain,
                   "--out", str(tmp_path / "x")])
    assert rc == 2
    payload = error_payload(capsys)
    assert payload["category"] == "config" and payload["exit_code"] == 2
    assert "seed" in payload["message"]


# ---------------------------------------------------------------------------
# config rejection


def test_config_rejection_is_total(tmp_path, capsys):
    out = tmp_path / "never"
    cases = [
        ({"simulate": {"preset": "sim-study"}, "mcmcc": {}}, "mcmcc"),
        ({"simulate": {"preset": "no-such"}}, "preset"),
        ({"simulate": {"preset": "sim-study"},
          "mcmc": {"iterations": "many"}}, "mcmc.iterations"),
        ({"simulate": {"preset": "sim-study"},
          "mcmc": {"aux": {"sweeps": 3}}}, "mcmc.aux"),
        ({"model": {"sign": {"terms": []}},
          "simulate": {"preset": "sim-study"}}, "model.sign.terms"),
        ({"fit": {"processes": ["sign", "sign"]},
          "model": {"sign": {"terms": ["edges+"]}}}, "duplicate"),
        ({"fit": {"processes": ["both"]}}, "'both'"),
        ({"seed": -1}, "seed"),
        ({"data": {"panel": str(tmp_path / "nope.csv")}}, "does not exist"),
    ]
    for raw, needle in cases:
        rc = cli.main(["simulate", "--config",
                       write_config(tmp_path / "c.yaml", raw),
                       "--seed", "1", "--out", str(out)])
        assert rc == 2, raw
        message = error_payload(capsys)["message"]
        assert needle in message, (raw, message)
        assert not out.exists()  # rejected before any computation


def test_config_file_problems(tmp_path, capsys):
    rc = cli.main(["simulate", "--config", str(tmp_path / "missing.yaml"),
                   "--seed", "1"])
    assert rc == 2 and "cannot read" in error_payload(capsys)["message"]
    bad = write(tmp_path / "bad.yaml", "simulate: [unclosed\n")
    assert cli.main(["simulate", "--config", bad, "--seed", "1"]) == 2
    assert "YAML" in error_payload(capsys)["message"]
    listy = write(tmp_path / "list.yaml", "- a\n- b\n")
    assert cli.main(["simulate", "--config", listy, "--seed", "1"]) == 2
    rc = cli.main(["fit"])
    assert rc == 2 and "--config" in error_payload(capsys)["message"]


# ---------------------------------------------------------------------------
# fit command


def fit_config(tmp_path, panel_text=TOY_PANEL, **overrides):
    panel = write(tmp_path / "panel.csv", panel_text)
    raw = {
        "data": {"panel": panel},
        "model": {"sign": {"terms": ["edges+"]}},
        "mcmc": {"iterations": 1200, "burn_in": 400,
                 "aux": {"iterations": 300}},
    }
    raw.update(overrides)
    return write_config(tmp_path / "fit.yaml", raw)


def test_fit_smoke_writes_all_outputs(tmp_path, capsys):
    cfg = fit_config(tmp_path)
    out = tmp_path / "out"
    rc = cli.main(["fit", "--config", cfg, "--seed", "31", "--out", str(out)])
    assert rc == 0
    assert "chain_sign.csv" in capsys.readouterr().out
    for name in ("chain_sign.csv", "chain_sign.meta.json", "report.csv",
                 "summary_sign.csv", "summary_sign.json"):
        assert (out / name).is_file(), name
    chain = sio.read_chain(out / "chain_sign.csv")
    assert chain.n_draws == 800 and chain.labels == ("F:edges+", "P:edges+")
    summary = read_rows(out / "summary_sign.csv")
    assert [r["block"] for r in summary] == ["F", "P"]
    payload = json.loads((out / "summary_sign.json").read_text())
    assert payload["kind"] == "sign" and len(payload["params"]) == 2


def test_fit_reruns_and_threads_are_byte_identical(tmp_path):
    cfg = fit_config(tmp_path)
    outs = [tmp_path / f"o{i}" for i in range(3)]
    for out, threads in zip(outs, ("1", "1", "3")):
        rc = cli.main(["fit", "--config", cfg, "--seed", "47",
                       "--out", str(out), "--threads", threads])
        assert rc == 0
    ref = (outs[0] / "chain_sign.csv").read_bytes()
    assert ref == (outs[1] / "chain_sign.csv").read_bytes()
    assert ref == (outs[2] / "chain_sign.csv").read_bytes()


def test_fit_config_errors(tmp_path, capsys):
    no_data = write_config(tmp_path / "a.yaml",
                           {"model": {"sign": {"terms": ["edges+"]}}})
    rc = cli.main(["fit", "--config", no_data, "--seed", "1",
                   "--out", str(tmp_path / "o1")])
    assert rc == 2 and "data" in error_payload(capsys)["message"]
    panel = write(tmp_path / "panel.csv", TOY_PANEL)
    no_model = write_config(tmp_path / "b.yaml",
                            {"data": {"panel": panel}})
    rc = cli.main(["fit", "--config", no_model, "--seed", "1",
                   "--out", str(tmp_path / "o2")])
    assert rc == 2 and "model" in error_payload(capsys)["message"]
    bad_term = write_config(
        tmp_path / "c.yaml",
        {"data": {"panel": panel},
         "model": {"sign": {"terms": ["edgez+"]}}})
    rc = cli.main(["fit", "--config", bad_term, "--seed", "1",
                   "--out", str(tmp_path / "o3")])
    assert rc == 2 and "edgez+" in error_payload(capsys)["message"]


def test_data_error_exits_3(tmp_path, capsys):
    dup = ("time,node_a,node_b,sign\n"
           "t1,a,b,+1\n"
           "t1,b,a,+1\n"
           "t2,a,b,-1\n")
    cfg = fit_config(tmp_path, panel_text=dup)
    rc = cli.main(["fit", "--config", cfg, "--seed", "1",
                   "--out", str(tmp_path / "o")])
    assert rc == 3
    payload = error_payload(capsys)
    assert payload["category"] == "data" and payload["exit_code"] == 3
    assert ":3:" in payload["message"]


def test_inference_error_exits_4(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise InferenceError("nothing identifiable to fit")

    monkeypatch.setattr(cli, "aea_sign", boom)
    cfg = fit_config(tmp_path)
    rc = cli.main(["fit", "--config", cfg, "--seed", "1",
                   "--out", str(tmp_path / "o")])
    assert rc == 4
    payload = error_payload(capsys)
    assert payload["category"] == "inference" and payload["exit_code"] == 4


# ---------------------------------------------------------------------------
# diagnose and ppc commands


def write_synthetic_chain(tmp_path, draws, name="chain.csv"):
    chain = Chain("sign", ("F:edges+", "P:edges+"), draws, 0.4, 5, {},
                  EDGES_SIGN)
    path = tmp_path / name
    sio.write_chain(chain, path)
    return str(path)


def test_diagnose_iid_chain_ess_near_n(tmp_path):
    rng = np.random.default_rng(61)
    n = 4000
    chain_path = write_synthetic_chain(tmp_path, rng.standard_normal((n, 2)))
    cfg = write_config(tmp_path / "d.yaml",
                       {"diagnose": {"chain": chain_path}})
    out = tmp_path / "out"
    assert cli.main(["diagnose", "--config", cfg, "--out", str(out)]) == 0
    summary = read_rows(out / "summary_sign.csv")
    assert len(summary) == 2
    for row in summary:
        assert 0.8 * n <= float(row["ess"]) <= 1.2 * n
    acf_rows = read_rows(out / "acf_sign.csv")
    assert len(acf_rows) == 2 * 20
    assert {r["lag"] for r in acf_rows} == {str(k) for k in range(1, 21)}
    assert all(abs(float(r["value"])) < 0.1 for r in acf_rows)


def test_diagnose_respects_level_and_max_lag(tmp_path):
    rng = np.random.default_rng(67)
    chain_path = write_synthetic_chain(tmp_path,
                                       rng.standard_normal((500, 2)))
    cfg = write_config(tmp_path / "d.yaml",
                       {"diagnose": {"chain": chain_path, "level": 0.5,
                                     "max_lag": 3}})
    out = tmp_path / "out"
    assert cli.main(["diagnose", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "summary_sign.json").read_text())
    assert payload["level"] == 0.5
    assert len(read_rows(out / "acf_sign.csv")) == 2 * 3


def test_ppc_command_writes_long_csv(tmp_path):
    panel = write(tmp_path / "panel.csv", TOY_PANEL)
    draws = np.tile([[-0.3, 0.2]], (50, 1))
    chain_path = write_synthetic_chain(tmp_path, draws)
    cfg = write_config(tmp_path / "p.yaml", {
        "data": {"panel": panel},
        "ppc": {"chain": chain_path, "draws": 20,
                "aux": {"iterations": 400}},
    })
    out = tmp_path / "out"
    assert cli.main(["ppc", "--config", cfg, "--seed", "71",
                     "--out", str(out)]) == 0
    with open(out / "ppc_sign.csv", newline="") as fh:
        header = fh.readline().strip().split(",")
    assert header == ["process", "term", "draw", "value"]
    rows = read_rows(out / "ppc_sign.csv")
    assert len(rows) == 20 * 2
    assert {r["process"] for r in rows} == {"F", "P"}
    assert all(r["term"] == "edges+" for r in rows)


def test_ppc_seed_repeat_identical(tmp_path):
    panel = write(tmp_path / "panel.csv", TOY_PANEL)
    draws = np.tile([[-0.3, 0.2]], (30, 1))
    chain_path = write_synthetic_chain(tmp_path, draws)
    cfg = write_config(tmp_path / "p.yaml", {
        "data": {"panel": panel},
        "ppc": {"chain": chain_path, "draws": 10,
                "aux": {"iterations": 200}},
    })
    outs = [tmp_path / f"o{i}" for i in range(2)]
    for out in outs:
        assert cli.main(["ppc", "--config", cfg, "--seed", "5",
                         "--out", str(out)]) == 0
    assert (outs[0] / "ppc_sign.csv").read_bytes() == \
        (outs[1] / "ppc_sign.csv").read_bytes()


# ---------------------------------------------------------------------------
# recover command


def test_recover_reports_coverage(tmp_path, capsys):
    cfg = write_config(tmp_path / "r.yaml", {
        "simulate": {"preset": "sim-study", "nodes": 12,
                     "aux": {"iterations": 800}},
        "mcmc": {"iterations": 1500, "burn_in": 500,
                 "aux": {"iterations": 300}},
    })
    out = tmp_path / "out"
    rc = cli.main(["recover", "--config", cfg, "--seed", "83",
                   "--out", str(out)])
    assert rc == 0
    assert "recovered" in capsys.readouterr().out
    for name in ("panel.csv", "chain_sign.csv", "summary_sign.csv",
                 "coverage.csv"):
        assert (out / name).is_file(), name
    rows = read_rows(out / "coverage.csv")
    assert len(rows) == 4
    assert [r["block"] for r in rows] == ["F", "F", "P", "P"]
    truths = [float(r["truth"]) for r in rows]
    assert truths == [0.0, 0.2, 0.0, 0.0]
    assert all(r["covered"] in {"0", "1"} for r in rows)
    for r in rows:
        assert float(r["lower"]) < float(r["upper"])

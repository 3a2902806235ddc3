"""Command-line front end wiring the package into reproducible runs.

Commands: ``simulate`` (forward-simulate a panel), ``fit`` (posterior
sampling for the sign and/or interaction process), ``ppc`` (posterior
predictive check of a stored fit), ``diagnose`` (ESS/ACF tables for a
stored fit), ``recover`` (simulate a panel from known truth, refit it, and
report interval coverage).

Runs are driven by a YAML config file; ``--seed``, ``--out`` and
``--threads`` override it, as do the environment variables SEPSIGN_SEED
and SEPSIGN_OUT (flags beat environment beats config). Unknown config keys
or malformed values abort before any computation. Exit codes: 0 success,
2 config error, 3 data error, 4 inference error; failures also print one
JSON line describing the error to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import diag
from . import io as sio
from . import sim as sims
from . import stats as st
from .errors import (
    ConfigError,
    DataError,
    InferenceError,
    StructuralError,
    SupportError,
    TermError,
)
from .infer import MCMCConfig, PriorSpec, aea_interaction, aea_sign
from .networks import BinaryNetwork, NetworkPanel, NodeSet
from .sim import SimConfig

log = logging.getLogger(__name__)

ENV_SEED = "SEPSIGN_SEED"
ENV_OUT = "SEPSIGN_OUT"

PROCESSES = ("sign", "interaction")

SIM_STUDY_PRESET = {
    "nodes": 40,
    "transitions": 1,
    "initial": {"density": 0.2, "positive_prob": 0.5},
    "interaction_step": {"kind": "tergm", "density": -2.0, "change": -2.0},
    "sign_step": {
        "terms": ["edges+", {"term": "gwesf+", "decay": 0.6}],
        "zeta_F": [0.0, 0.2],
        "zeta_P": [0.0, 0.0],
    },
}

SUMMARY_HEADER = ["block", "term", "mean", "median", "lower", "upper", "ess"]
REPORT_HEADER = ["time", "nodes", "edges", "density", "positive_fraction"]
PPC_HEADER = ["process", "term", "draw", "value"]
ACF_HEADER = ["block", "term", "lag", "value"]
COVERAGE_HEADER = ["block", "term", "truth", "lower", "upper", "covered"]


# ---------------------------------------------------------------- config

def _where(path: tuple) -> str:
    return ".".join(path) if path else "config"


def _check_keys(section: dict, allowed, path: tuple) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{_where(path)}: unknown key(s) {', '.join(map(repr, unknown))}"
        )


def _as_mapping(value, path: tuple) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{_where(path)}: expected a mapping")
    return value


def _as_int(value, path: tuple, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{_where(path)}: expected an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{_where(path)}: must be at least {minimum}")
    return value


def _as_float(value, path: tuple) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{_where(path)}: expected a number")
    return float(value)


def _as_bool(value, path: tuple) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{_where(path)}: expected true or false")
    return value


def _as_str(value, path: tuple) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{_where(path)}: expected a nonempty string")
    return value


def _as_float_list(value, path: tuple) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(f"{_where(path)}: expected a list of numbers")
    return [_as_float(v, path + (str(i),)) for i, v in enumerate(value)]


def _existing_file(value, path: tuple) -> str:
    text = _as_str(value, path)
    if not Path(text).is_file():
        raise ConfigError(f"{_where(path)}: file {text!r} does not exist")
    return text


def _terms_entry(value, path: tuple):
    if isinstance(value, str):
        return {"term": value}
    entry = _as_mapping(value, path)
    _check_keys(entry, {"term", "decay"}, path)
    if "term" not in entry:
        raise ConfigError(f"{_where(path)}: missing key 'term'")
    out = {"term": _as_str(entry["term"], path + ("term",))}
    if "decay" in entry:
        out["decay"] = _as_float(entry["decay"], path + ("decay",))
    return out


def _validate_terms(value, path: tuple) -> list[dict]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{_where(path)}: expected a nonempty list of terms")
    return [_terms_entry(v, path + (str(i),)) for i, v in enumerate(value)]


def _validate_model_section(section, path: tuple) -> dict:
    section = _as_mapping(section, path)
    _check_keys(section, {"terms"}, path)
    if "terms" not in section:
        raise ConfigError(f"{_where(path)}: missing key 'terms'")
    return {"terms": _validate_terms(section["terms"], path + ("terms",))}


def _validate_prior(section, path: tuple) -> dict:
    section = _as_mapping(section, path)
    _check_keys(section, {"mean", "sd"}, path)
    out = {"mean": {}, "sd": {}}
    for key in ("mean", "sd"):
        sub = _as_mapping(section.get(key), path + (key,))
        for name, value in sub.items():
            out[key][_as_str(name, path + (key,))] = _as_float(
                value, path + (key, str(name)))
    return out


def _validate_aux(section, path: tuple) -> dict:
    section = _as_mapping(section, path)
    _check_keys(section, {"iterations", "burn_in", "sweep_mode",
                          "sign_updater"}, path)
    out = {}
    if "iterations" in section:
        out["iterations"] = _as_int(section["iterations"],
                                    path + ("iterations",), minimum=0)
    if "burn_in" in section:
        out["burn_in"] = _as_int(section["burn_in"], path + ("burn_in",),
                                 minimum=0)
    if "sweep_mode" in section:
        out["sweep_mode"] = _as_str(section["sweep_mode"],
                                    path + ("sweep_mode",))
    if "sign_updater" in section:
        out["sign_updater"] = _as_str(section["sign_updater"],
                                      path + ("sign_updater",))
    return out


def _validate_mcmc(section, path: tuple) -> dict:
    section = _as_mapping(section, path)
    allowed = {"iterations", "burn_in", "adapt_start", "adapt_scale",
               "adapt_jitter", "initial_proposal_sd", "blockwise", "aux"}
    _check_keys(section, allowed, path)
    out = {}
    for key in ("iterations", "burn_in", "adapt_start"):
        if key in section:
            out[key] = _as_int(section[key], path + (key,), minimum=0)
    for key in ("adapt_scale", "adapt_jitter", "initial_proposal_sd"):
        if key in section and section[key] is not None:
            out[key] = _as_float(section[key], path + (key,))
    if "blockwise" in section:
        out["blockwise"] = _as_bool(section["blockwise"], path + ("blockwise",))
    out["aux"] = _validate_aux(section.get("aux"), path + ("aux",))
    return out


def _validate_simulate(section, path: tuple) -> dict:
    section = _as_mapping(section, path)
    allowed = {"preset", "nodes", "transitions", "initial",
               "interaction_step", "sign_step", "aux"}
    _check_keys(section, allowed, path)
    out = {}
    if "preset" in section:
        preset = _as_str(section["preset"], path + ("preset",))
        if preset != "sim-study":
            raise ConfigError(
                f"{_where(path + ('preset',))}: unknown preset {preset!r}"
            )
        out["preset"] = preset
    if "nodes" in section:
        out["nodes"] = _as_int(section["nodes"], path + ("nodes",), minimum=2)
    if "transitions" in section:
        out["transitions"] = _as_int(section["transitions"],
                                     path + ("transitions",), minimum=1)
    if "initial" in section:
        sub = _as_mapping(section["initial"], path + ("initial",))
        _check_keys(sub, {"density", "positive_prob"}, path + ("initial",))
        out["initial"] = {
            key: _as_float(sub[key], path + ("initial", key))
            for key in sub
        }
    if "interaction_step" in section:
        sub = _as_mapping(section["interaction_step"],
                          path + ("interaction_step",))
        sub_path = path + ("interaction_step",)
        kind = _as_str(sub.get("kind", ""), sub_path + ("kind",)) \
            if "kind" in sub else None
        if kind is None:
            raise ConfigError(f"{_where(sub_path)}: missing key 'kind'")
        step = {"kind": kind}
        if kind == "tergm":
            _check_keys(sub, {"kind", "density", "change"}, sub_path)
            for key in ("density", "change"):
                if key not in sub:
                    raise ConfigError(f"{_where(sub_path)}: missing key {key!r}")
                step[key] = _as_float(sub[key], sub_path + (key,))
        elif kind == "stergm":
            _check_keys(sub, {"kind", "terms", "xi_F", "xi_P"}, sub_path)
            for key in ("terms", "xi_F", "xi_P"):
                if key not in sub:
                    raise ConfigError(f"{_where(sub_path)}: missing key {key!r}")
            step["terms"] = _validate_terms(sub["terms"], sub_path + ("terms",))
            step["xi_F"] = _as_float_list(sub["xi_F"], sub_path + ("xi_F",))
            step["xi_P"] = _as_float_list(sub["xi_P"], sub_path + ("xi_P",))
        elif kind == "frozen":
            _check_keys(sub, {"kind"}, sub_path)
        else:
            raise ConfigError(
                f"{_where(sub_path + ('kind',))}: must be tergm, stergm or "
                f"frozen, got {kind!r}"
            )
        out["interaction_step"] = step
    if "sign_step" in section:
        sub = _as_mapping(section["sign_step"], path + ("sign_step",))
        sub_path = path + ("sign_step",)
        _check_keys(sub, {"terms", "zeta_F", "zeta_P"}, sub_path)
        for key in ("terms", "zeta_F", "zeta_P"):
            if key not in sub:
                raise ConfigError(f"{_where(sub_path)}: missing key {key!r}")
        out["sign_step"] = {
            "terms": _validate_terms(sub["terms"], sub_path + ("terms",)),
            "zeta_F": _as_float_list(sub["zeta_F"], sub_path + ("zeta_F",)),
            "zeta_P": _as_float_list(sub["zeta_P"], sub_path + ("zeta_P",)),
        }
    out["aux"] = _validate_aux(section.get("aux"), path + ("aux",))
    return out


def validate_config(raw: dict) -> dict:
    """Check every key and value of a parsed config; total rejection."""
    raw = _as_mapping(raw, ())
    allowed = {"seed", "out", "threads", "data", "covariates", "model",
               "prior", "mcmc", "fit", "simulate", "ppc", "diagnose",
               "recover"}
    _check_keys(raw, allowed, ())
    cfg: dict = {}
    if "seed" in raw:
        cfg["seed"] = _as_int(raw["seed"], ("seed",), minimum=0)
    if "out" in raw:
        cfg["out"] = _as_str(raw["out"], ("out",))
    if "threads" in raw:
        cfg["threads"] = _as_int(raw["threads"], ("threads",), minimum=1)

    if "data" in raw:
        data = _as_mapping(raw["data"], ("data",))
        _check_keys(data, {"panel", "attributes"}, ("data",))
        if "panel" not in data:
            raise ConfigError("data: missing key 'panel'")
        cfg["data"] = {"panel": _existing_file(data["panel"],
                                               ("data", "panel"))}
        if "attributes" in data:
            cfg["data"]["attributes"] = _existing_file(
                data["attributes"], ("data", "attributes"))

    if "covariates" in raw:
        covs = _as_mapping(raw["covariates"], ("covariates",))
        cfg["covariates"] = {
            _as_str(name, ("covariates",)): _existing_file(
                value, ("covariates", str(name)))
            for name, value in covs.items()
        }

    if "model" in raw:
        model = _as_mapping(raw["model"], ("model",))
        _check_keys(model, set(PROCESSES), ("model",))
        cfg["model"] = {
            proc: _validate_model_section(model[proc], ("model", proc))
            for proc in PROCESSES if proc in model
        }

    cfg["prior"] = _validate_prior(raw.get("prior"), ("prior",))
    cfg["mcmc"] = _validate_mcmc(raw.get("mcmc"), ("mcmc",))

    if "fit" in raw:
        fit = _as_mapping(raw["fit"], ("fit",))
        _check_keys(fit, {"processes"}, ("fit",))
        if "processes" in fit:
            procs = fit["processes"]
            if not isinstance(procs, list) or not procs:
                raise ConfigError("fit.processes: expected a nonempty list")
            for p in procs:
                if p not in PROCESSES:
                    raise ConfigError(
                        f"fit.processes: must contain only "
                        f"{', '.join(PROCESSES)}, got {p!r}"
                    )
            if len(set(procs)) != len(procs):
                raise ConfigError("fit.processes: duplicate entries")
            cfg["fit"] = {"processes": list(procs)}

    cfg["simulate"] = _validate_simulate(raw.get("simulate"), ("simulate",))

    if "ppc" in raw:
        sub = _as_mapping(raw["ppc"], ("ppc",))
        _check_keys(sub, {"chain", "draws", "aux"}, ("ppc",))
        if "chain" not in sub:
            raise ConfigError("ppc: missing key 'chain'")
        cfg["ppc"] = {
            "chain": _existing_file(sub["chain"], ("ppc", "chain")),
            "aux": _validate_aux(sub.get("aux"), ("ppc", "aux")),
        }
        if "draws" in sub:
            cfg["ppc"]["draws"] = _as_int(sub["draws"], ("ppc", "draws"),
                                          minimum=1)

    if "diagnose" in raw:
        sub = _as_mapping(raw["diagnose"], ("diagnose",))
        _check_keys(sub, {"chain", "level", "max_lag"}, ("diagnose",))
        if "chain" not in sub:
            raise ConfigError("diagnose: missing key 'chain'")
        cfg["diagnose"] = {
            "chain": _existing_file(sub["chain"], ("diagnose", "chain")),
        }
        if "level" in sub:
            level = _as_float(sub["level"], ("diagnose", "level"))
            if not (0 < level < 1):
                raise ConfigError("diagnose.level: must lie in (0, 1)")
            cfg["diagnose"]["level"] = level
        if "max_lag" in sub:
            cfg["diagnose"]["max_lag"] = _as_int(
                sub["max_lag"], ("diagnose", "max_lag"), minimum=1)

    if "recover" in raw:
        _check_keys(_as_mapping(raw["recover"], ("recover",)), set(),
                    ("recover",))
    return cfg


# ------------------------------------------------------------- builders

def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _model_from_terms(entries: list[dict], layer: str) -> st.ModelSpec:
    terms = tuple(st.parse_term(e["term"], decay=e.get("decay"))
                  for e in entries)
    if layer == "sign":
        return st.ModelSpec.sign(terms)
    return st.ModelSpec.binary(terms)


def _sim_config(aux: dict, seed: Optional[int] = None) -> SimConfig:
    return SimConfig(
        aux_iterations=aux.get("iterations", 5000),
        burn_in=aux.get("burn_in", 0),
        sweep_mode=aux.get("sweep_mode", "random_scan"),
        sign_updater=aux.get("sign_updater", "gibbs"),
        seed=seed,
    )


def _mcmc_config(cfg: dict, seed: int, threads: int) -> MCMCConfig:
    mcmc = cfg["mcmc"]
    return MCMCConfig(
        iterations=mcmc.get("iterations", 35000),
        burn_in=mcmc.get("burn_in", 10000),
        aux=_sim_config(mcmc["aux"]),
        adapt_start=mcmc.get("adapt_start", 500),
        adapt_scale=mcmc.get("adapt_scale"),
        adapt_jitter=mcmc.get("adapt_jitter", 1e-5),
        initial_proposal_sd=mcmc.get("initial_proposal_sd", 0.1),
        seed=seed,
        threads=threads,
        blockwise=mcmc.get("blockwise", False),
    )


def _load_covariates(cfg: dict, nodes: NodeSet) -> Optional[dict]:
    paths = cfg.get("covariates")
    if not paths:
        return None
    return {name: sio.read_dyad_covariate(path, nodes)
            for name, path in paths.items()}


def _process_seeds(seed: int) -> dict:
    state = np.random.SeedSequence(seed).generate_state(4, np.uint64)
    return {"simulate": int(state[0]), "sign": int(state[1]),
            "interaction": int(state[2]), "ppc": int(state[3])}


def _resolve_scalar(flag, env_name: Optional[str], cfg_value, default):
    if flag is not None:
        return flag
    if env_name is not None:
        env = os.environ.get(env_name)
        if env is not None:
            return env
    if cfg_value is not None:
        return cfg_value
    return default


def _resolve_seed(args, cfg: dict, required: bool) -> Optional[int]:
    value = _resolve_scalar(args.seed, ENV_SEED, cfg.get("seed"), None)
    if value is None:
        if required:
            raise ConfigError(
                "a seed is required (set --seed, SEPSIGN_SEED, or the "
                "config key 'seed')"
            )
        return None
    try:
        seed = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be a nonnegative integer, got {value!r}") \
            from None
    if not (0 <= seed < 2 ** 64):
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    return seed


def _resolve_out(args, cfg: dict) -> Path:
    out = Path(_resolve_scalar(args.out, ENV_OUT, cfg.get("out"), "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_threads(args, cfg: dict) -> int:
    value = _resolve_scalar(args.threads, None, cfg.get("threads"), 1)
    try:
        threads = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"threads must be a positive integer, got {value!r}") \
            from None
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return threads


def _load_panel(cfg: dict) -> NetworkPanel:
    if "data" not in cfg:
        raise ConfigError("this command needs a 'data' section with a panel")
    data = cfg["data"]
    return sio.read_panel(data["panel"], data.get("attributes"))


def _write_report(panel: NetworkPanel, out: Path) -> None:
    sio.write_table(sio.panel_report(panel), REPORT_HEADER, out / "report.csv")


def _write_summary(summary, out: Path, name: str) -> None:
    rows = summary.rows()
    for row in rows:
        for key in ("mean", "median", "lower", "upper", "ess"):
            row[key] = repr(row[key])
    sio.write_table(rows, SUMMARY_HEADER, out / f"summary_{name}.csv")
    payload = {
        "kind": summary.kind,
        "level": summary.level,
        "acceptance_rate": summary.acceptance_rate,
        "params": summary.rows(),
    }
    sio._atomic_write(out / f"summary_{name}.json",
                      json.dumps(payload, indent=2) + "\n")


# ------------------------------------------------------------- commands

def _simulation_settings(cfg: dict) -> dict:
    section = cfg["simulate"]
    if section.get("preset") == "sim-study":
        merged = _merge(SIM_STUDY_PRESET,
                        {k: v for k, v in section.items() if k != "preset"})
        merged["sign_step"] = dict(merged["sign_step"])
        merged["sign_step"]["terms"] = [
            _terms_entry(t, ("simulate", "sign_step", "terms"))
            for t in merged["sign_step"]["terms"]
        ]
        section = merged
    for key in ("nodes", "transitions", "initial", "interaction_step"):
        if key not in section:
            raise ConfigError(f"simulate: missing key {key!r} (and no preset)")
    initial = {"density": 0.2, "positive_prob": 0.5}
    initial.update(section["initial"])
    step = section["interaction_step"]
    sign_step = section.get("sign_step")
    if sign_step is None and step["kind"] != "frozen":
        raise ConfigError(
            "simulate: a sign_step is required unless the interaction step "
            "is frozen"
        )
    if sign_step is not None:
        model = _model_from_terms(sign_step["terms"], "sign")
        for key in ("zeta_F", "zeta_P"):
            if len(sign_step[key]) != model.n_terms:
                raise ConfigError(
                    f"simulate.sign_step.{key}: expected {model.n_terms} "
                    f"value(s), got {len(sign_step[key])}"
                )
    if step["kind"] == "stergm":
        bmodel = _model_from_terms(step["terms"], "interaction")
        for key in ("xi_F", "xi_P"):
            if len(step[key]) != bmodel.n_terms:
                raise ConfigError(
                    f"simulate.interaction_step.{key}: expected "
                    f"{bmodel.n_terms} value(s), got {len(step[key])}"
                )
    return {
        "nodes": section["nodes"],
        "transitions": section["transitions"],
        "initial": initial,
        "interaction_step": step,
        "sign_step": sign_step,
        "aux": section.get("aux", {}),
    }


def _run_simulation(settings: dict, seed: int,
                    covariates: Optional[dict]) -> NetworkPanel:
    n = settings["nodes"]
    nodes = NodeSet([f"v{i}" for i in range(n)])
    n_trans = settings["transitions"]
    children = np.random.SeedSequence(seed).spawn(1 + n_trans)
    rng0 = np.random.default_rng(children[0])
    y = sims.erdos_renyi_signed(nodes, settings["initial"]["density"],
                                settings["initial"]["positive_prob"], rng0)
    aux = _sim_config(settings["aux"])
    step = settings["interaction_step"]
    sign_step = settings["sign_step"]
    sign_model = None
    if sign_step is not None:
        sign_model = _model_from_terms(sign_step["terms"], "sign")
        zeta_F = np.asarray(sign_step["zeta_F"], dtype=np.float64)
        zeta_P = np.asarray(sign_step["zeta_P"], dtype=np.float64)
    bmodel = None
    if step["kind"] == "stergm":
        bmodel = _model_from_terms(step["terms"], "interaction")

    waves = [y]
    for t in range(n_trans):
        rng = np.random.default_rng(children[1 + t])
        x_prev = y.interaction()
        if step["kind"] == "tergm":
            x_next = sims.simulate_tergm_binary(x_prev, step["density"],
                                                step["change"], aux, rng=rng)
        elif step["kind"] == "stergm":
            tri = np.triu(np.ones((n, n), dtype=bool), k=1)
            ii, jj = np.nonzero(tri & (x_prev.adjacency == 0))
            absent = np.column_stack([ii, jj]).astype(np.int64)
            x_F = sims.sample_binary_layer(x_prev, x_prev.active_dyads(),
                                           None, step["xi_F"], bmodel, aux,
                                           covariates=covariates, rng=rng)
            x_P = sims.sample_binary_layer(x_prev, None, absent, step["xi_P"],
                                           bmodel, aux,
                                           covariates=covariates, rng=rng)
            adj = ((x_P.adjacency != 0)
                   | ((x_F.adjacency != 0) & (x_prev.adjacency == 0)))
            x_next = BinaryNetwork(nodes, adj.astype(np.uint8))
        else:
            x_next = x_prev
        if sign_model is not None:
            y = sims.simulate_signs_given_support(
                y, x_next, zeta_F, zeta_P, sign_model, aux,
                covariates=covariates, rng=rng)
        else:
            if not np.array_equal(x_next.adjacency, x_prev.adjacency):
                raise ConfigError(
                    "simulate: new ties appeared but no sign_step assigns "
                    "their signs"
                )
            # support unchanged and no sign step: the wave carries over
        waves.append(y)
    return NetworkPanel(waves)


def cmd_simulate(args, cfg: dict) -> int:
    seed = _resolve_seed(args, cfg, required=True)
    out = _resolve_out(args, cfg)
    settings = _simulation_settings(cfg)
    nodes = NodeSet([f"v{i}" for i in range(settings["nodes"])])
    covariates = _load_covariates(cfg, nodes)
    panel = _run_simulation(settings, seed, covariates)
    sio.write_panel(panel, out / "panel.csv")
    _write_report(panel, out)
    print(f"wrote {out / 'panel.csv'} ({panel.n_waves} waves, "
          f"{panel.nodes.n} nodes)")
    return 0


def _fit_processes(cfg: dict) -> list[str]:
    if "model" not in cfg or not cfg["model"]:
        raise ConfigError("fit needs a 'model' section with term lists")
    if "fit" in cfg and "processes" in cfg["fit"]:
        procs = cfg["fit"]["processes"]
        for proc in procs:
            if proc not in cfg["model"]:
                raise ConfigError(
                    f"fit.processes includes {proc!r} but model.{proc} "
                    f"is missing"
                )
        return procs
    return [p for p in PROCESSES if p in cfg["model"]]


def cmd_fit(args, cfg: dict) -> int:
    seed = _resolve_seed(args, cfg, required=True)
    out = _resolve_out(args, cfg)
    threads = _resolve_threads(args, cfg)
    panel = _load_panel(cfg)
    _write_report(panel, out)
    covariates = _load_covariates(cfg, panel.nodes)
    seeds = _process_seeds(seed)
    for proc in _fit_processes(cfg):
        layer = "sign" if proc == "sign" else "interaction"
        model = _model_from_terms(cfg["model"][proc]["terms"], layer)
        prior = PriorSpec.default_for(model, cfg["prior"]["mean"],
                                      cfg["prior"]["sd"])
        mcfg = _mcmc_config(cfg, seeds[proc], threads)
        runner = aea_sign if proc == "sign" else aea_interaction
        log.info("fitting the %s process (%d iterations)", proc,
                 mcfg.iterations)
        chain = runner(panel, model, prior=prior, cfg=mcfg,
                       covariates=covariates)
        sio.write_chain(chain, out / f"chain_{proc}.csv")
        _write_summary(diag.summarize(chain), out, proc)
        print(f"wrote {out / f'chain_{proc}.csv'} "
              f"(acceptance {chain.acceptance_rate:.3f})")
    return 0


def cmd_ppc(args, cfg: dict) -> int:
    if "ppc" not in cfg:
        raise ConfigError("ppc needs a 'ppc' section naming a chain file")
    seed = _resolve_seed(args, cfg, required=False)
    out = _resolve_out(args, cfg)
    panel = _load_panel(cfg)
    chain = sio.read_chain(cfg["ppc"]["chain"])
    covariates = _load_covariates(cfg, panel.nodes)
    sim_cfg = _sim_config(cfg["ppc"]["aux"], seed=0 if seed is None else seed)
    result = diag.ppc(panel, chain, n_draws=cfg["ppc"].get("draws", 200),
                      cfg=sim_cfg, covariates=covariates)
    rows = result.rows()
    for row in rows:
        row["value"] = repr(row["value"])
    path = out / f"ppc_{chain.kind}.csv"
    sio.write_table(rows, PPC_HEADER, path)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_diagnose(args, cfg: dict) -> int:
    if "diagnose" not in cfg:
        raise ConfigError("diagnose needs a 'diagnose' section naming a "
                          "chain file")
    out = _resolve_out(args, cfg)
    chain = sio.read_chain(cfg["diagnose"]["chain"])
    level = cfg["diagnose"].get("level", 0.95)
    max_lag = cfg["diagnose"].get("max_lag", 20)
    summary = diag.summarize(chain, level=level, max_lag=max_lag)
    _write_summary(summary, out, chain.kind)
    acf_rows = []
    for param in summary.params:
        block, term = param.label.split(":", 1)
        for lag, value in enumerate(param.acf, start=1):
            acf_rows.append({"block": block, "term": term, "lag": lag,
                             "value": repr(float(value))})
    sio.write_table(acf_rows, ACF_HEADER, out / f"acf_{chain.kind}.csv")
    print(f"wrote {out / f'summary_{chain.kind}.csv'} and "
          f"{out / f'acf_{chain.kind}.csv'}")
    return 0


def cmd_recover(args, cfg: dict) -> int:
    seed = _resolve_seed(args, cfg, required=True)
    out = _resolve_out(args, cfg)
    threads = _resolve_threads(args, cfg)
    section = dict(cfg["simulate"])
    section.setdefault("preset", "sim-study")
    cfg_sim = dict(cfg)
    cfg_sim["simulate"] = section
    settings = _simulation_settings(cfg_sim)
    if settings["sign_step"] is None:
        raise ConfigError("recover needs a sign_step to define the truth")
    seeds = _process_seeds(seed)
    covariates = None
    panel = _run_simulation(settings, seeds["simulate"], covariates)
    sio.write_panel(panel, out / "panel.csv")
    _write_report(panel, out)

    model = _model_from_terms(settings["sign_step"]["terms"], "sign")
    prior = PriorSpec.default_for(model, cfg["prior"]["mean"],
                                  cfg["prior"]["sd"])
    mcfg = _mcmc_config(cfg, seeds["sign"], threads)
    chain = aea_sign(panel, model, prior=prior, cfg=mcfg)
    sio.write_chain(chain, out / "chain_sign.csv")
    summary = diag.summarize(chain)
    _write_summary(summary, out, "sign")

    truth = np.concatenate([settings["sign_step"]["zeta_F"],
                            settings["sign_step"]["zeta_P"]])
    rows = []
    n_covered = 0
    for value, param in zip(truth, summary.params):
        block, term = param.label.split(":", 1)
        covered = param.lower <= value <= param.upper
        n_covered += covered
        rows.append({"block": block, "term": term, "truth": value,
                     "lower": repr(param.lower), "upper": repr(param.upper),
                     "covered": int(covered)})
    sio.write_table(rows, COVERAGE_HEADER, out / "coverage.csv")
    print(f"recovered {n_covered}/{len(rows)} parameters inside their "
          f"{summary.level:.0%} intervals")
    return 0


# ----------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepsign",
        description="Simulation and Bayesian estimation of separable "
                    "two-layer transition models for dynamic signed "
                    "networks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "simulate": "forward-simulate a signed panel",
        "fit": "sample the posterior of the configured processes",
        "ppc": "posterior predictive check of a stored chain",
        "diagnose": "ESS and autocorrelation tables for a stored chain",
        "recover": "simulate from known truth, refit, report coverage",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, help="master seed (u64)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int,
                       help="worker threads for auxiliary simulation")
        p.add_argument("--verbose", action="store_true",
                       help="log progress to stderr")
    return parser


_HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "ppc": cmd_ppc,
    "diagnose": cmd_diagnose,
    "recover": cmd_recover,
}
_NEEDS_CONFIG = {"fit", "ppc", "diagnose"}


def _fail(code: int, category: str, exc: Exception) -> int:
    payload = {"error": {"category": category,
                         "type": type(exc).__name__,
                         "message": str(exc),
                         "exit_code": code}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.config is not None:
            cfg = validate_config(sio.load_config(args.config))
        elif args.command in _NEEDS_CONFIG:
            raise ConfigError(f"{args.command} requires --config")
        else:
            cfg = validate_config({})
        return _HANDLERS[args.command](args, cfg)
    except (ConfigError, TermError) as exc:
        return _fail(2, "config", exc)
    except (DataError, StructuralError, SupportError) as exc:
        return _fail(3, "data", exc)
    except InferenceError as exc:
        return _fail(4, "inference", exc)


if __name__ == "__main__":
    sys.exit(main())

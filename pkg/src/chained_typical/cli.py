"""Experiment runner.

Usage::

    chained-typical --config run.json [--mode MODE] [--out DIR] [--quiet]

The config is one JSON document. Keys by mode (defaults in brackets)::

    classical-verify  model, eps, N_max, M [null: tuned], build_eps [eps], tighten [false]
    quantum-verify    state, eps, N_max, l_max [12], block_length [null],
                      band_eps [null], band_start [null]
    code-demo         model, eps, N_max, M [null: tuned], n [N_max], trials [1000], seed [0]

``model`` is ``{"kind": "iid", "probs": [...]}`` or ``{"kind": "markov",
"transition": [[...]], "initial": [...]}``. ``state`` is ``{"kind":
"iid_product", "rho": ...}``, ``{"kind": "classical_markov", "transition":
...}`` or ``{"kind": "rotated_classical", "transition": ..., "unitary":
...}``; complex entries are ``[re, im]`` pairs. ``mode``, ``seed`` and
``out`` are accepted in every mode.

Exit status: 0 all conditions pass, 1 a condition fails or construction
fails, 2 invalid config, 3 dense dimension cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .chained_sets import build_chained_family, tighten_family, tune_band_start, verify_bstar
from .coder import Codebook, rate_report
from .exceptions import ConfigError, ConstructionError, DomainError, ResourceError, SelectionError
from .process import entropy_rate
from .projectors import build_chained_projectors, verify_quantum
from .serialize import dumps, emit_report, family_to_text, model_from_dict, projector_family_to_dict, state_from_dict

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3
MODES = ("classical-verify", "quantum-verify", "code-demo")
COMMON_KEYS = {"mode", "seed", "out"}
MODE_KEYS = {
    "classical-verify": {"model", "eps", "N_max", "M", "build_eps", "tighten"},
    "quantum-verify": {"state", "eps", "N_max", "l_max", "block_length", "band_eps", "band_start"},
    "code-demo": {"model", "eps", "N_max", "M", "n", "trials", "seed"},
}
# words in validation messages that identify the offending field
FIELD_HINTS = {
    "transition": ("row", "stochastic", "primitive", "transition"),
    "probs": ("probab", "sum"),
    "rho": ("hermitian", "trace", "positive", "density"),
    "unitary": ("unitary",),
    "initial": ("initial",),
}
REQUIRED = {
    "classical-verify": ("model", "eps", "N_max"),
    "quantum-verify": ("state", "eps", "N_max"),
    "code-demo": ("model", "eps", "N_max"),
}


@dataclass
class ExperimentConfig:
    mode: str
    raw: dict[str, Any]
    text: str = ""
    model: Any = None
    state: Any = None
    params: dict[str, Any] = field(default_factory=dict)


def _line_of(text: str, *path: str) -> int | None:
    """Line of the last key in ``path``, searching each key after the previous one."""
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def _number(cfg: dict, text: str, key: str, kind: type, lo=None, allow_none=False, default=None):
    if key not in cfg:
        return default
    v = cfg[key]
    if v is None and allow_none:
        return None
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind is int:
        ok = ok and float(v).is_integer()
    if not ok or not math.isfinite(v):
        raise ConfigError(f"{key} must be {'an integer' if kind is int else 'a number'}, got {v!r}", _line_of(text, key))
    v = kind(v)
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}, got {v}", _line_of(text, key))
    return v


def parse_config(text: str, mode_override: str | None = None) -> ExperimentConfig:
    """Validate a JSON config document.

    Raises:
        ConfigError: syntax errors, unknown or missing keys, bad values,
            non-stochastic matrices, non-unitary unitaries; the message
            names the offending line.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", 1)
    mode = mode_override or raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {mode!r}", _line_of(text, "mode") if not mode_override else None)
    for key in raw:
        if key not in COMMON_KEYS | MODE_KEYS[mode]:
            raise ConfigError(f"unknown key {key!r} for mode {mode}", _line_of(text, key))
    for key in REQUIRED[mode]:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r} for mode {mode}", 1)
    cfg = ExperimentConfig(mode, raw, text)
    p = cfg.params
    p["eps"] = _number(raw, text, "eps", float)
    if not 0 < p["eps"]:
        raise ConfigError(f"eps must be positive, got {p['eps']}", _line_of(text, "eps"))
    p["N_max"] = _number(raw, text, "N_max", int, lo=1)
    p["seed"] = _number(raw, text, "seed", int, lo=0, default=0)
    if "out" in raw and not isinstance(raw["out"], str):
        raise ConfigError("out must be a string path", _line_of(text, "out"))

    if mode == "quantum-verify":
        cfg.state = _load_block(raw, text, "state", state_from_dict)
        p["l_max"] = _number(raw, text, "l_max", int, lo=1, default=12)
        p["block_length"] = _number(raw, text, "block_length", int, lo=1, allow_none=True)
        p["band_eps"] = _number(raw, text, "band_eps", float, allow_none=True)
        p["band_start"] = _number(raw, text, "band_start", int, lo=1, allow_none=True)
        return cfg

    cfg.model = _load_block(raw, text, "model", model_from_dict)
    p["M"] = _number(raw, text, "M", int, lo=1, allow_none=True)
    if mode == "classical-verify":
        p["build_eps"] = _number(raw, text, "build_eps", float, allow_none=True)
        tighten = raw.get("tighten", False)
        if not isinstance(tighten, bool):
            raise ConfigError("tighten must be true or false", _line_of(text, "tighten"))
        p["tighten"] = tighten
    else:
        p["n"] = _number(raw, text, "n", int, lo=1, default=p["N_max"])
        p["trials"] = _number(raw, text, "trials", int, lo=1, default=1000)
        if p["n"] > p["N_max"]:
            raise ConfigError(f"n={p['n']} exceeds N_max={p['N_max']}", _line_of(text, "n"))
    return cfg


def _load_block(raw: dict, text: str, key: str, loader):
    block = raw[key]
    if not isinstance(block, dict):
        raise ConfigError(f"{key} must be an object", _line_of(text, key))
    try:
        return loader(block)
    except KeyError as e:
        raise ConfigError(f"{key} is missing field {e.args[0]!r}", _line_of(text, key)) from None
    except (DomainError, ValueError, TypeError) as e:
        blamed = [sub for sub in block if sub in FIELD_HINTS and any(w in str(e).lower() for w in FIELD_HINTS[sub])]
        line = _line_of(text, key, blamed[0]) if blamed else _line_of(text, key)
        raise ConfigError(f"invalid {key}: {e}", line) from None


def _out_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    d = Path(out or cfg.raw.get("out") or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def run(cfg: ExperimentConfig, out: str | None = None, quiet: bool = False) -> int:
    """Execute ``cfg``, write reports, return the exit status."""
    say = (lambda *a: None) if quiet else print
    p = cfg.params
    d = _out_dir(cfg, out)
    if cfg.mode == "classical-verify":
        model = cfg.model
        h = entropy_rate(model).h
        beps = p["eps"] if p["build_eps"] is None else p["build_eps"]
        M = p["M"] if p["M"] is not None else tune_band_start(model, h, beps, p["N_max"])
        fam = build_chained_family(model, h, beps, M, p["N_max"])
        if p["tighten"]:
            fam = tighten_family(fam, model, beps)
        rep = verify_bstar(fam, model, h, p["eps"], fam.N_eps)
        (d / "family.txt").write_text(family_to_text(fam), encoding="utf-8")
        emit_report(rep, "csv", d / "classical_report.csv")
        emit_report(rep, "json", d / "classical_report.json")
        say(f"h = {h:.12g} nats ({h / math.log(2):.12g} bits), M = {M}, N(eps) = {fam.N_eps}")
        for name, ok in rep.conditions.items():
            say(f"{name}: {'pass' if ok else 'FAIL'}" + (f" ({rep.violations[name]})" if name in rep.violations else ""))
        return EXIT_OK if rep.passed else EXIT_FAIL

    if cfg.mode == "quantum-verify":
        fam = build_chained_projectors(
            cfg.state,
            p["eps"],
            p["N_max"],
            l_max=p["l_max"],
            block_length=p["block_length"],
            band_eps=p["band_eps"],
            band_start=p["band_start"],
        )
        rep = verify_quantum(fam)
        (d / "projectors.json").write_text(dumps(projector_family_to_dict(fam)), encoding="utf-8")
        emit_report(rep, "csv", d / "quantum_report.csv")
        emit_report(rep, "json", d / "quantum_report.json")
        say(f"s = {fam.s:.12g} nats, l = {fam.l}, N(eps) = {fam.N_eps}, observed N = {rep.observed_N}")
        for name, ok in rep.conditions.items():
            say(f"{name}: {'pass' if ok else 'FAIL'}")
        return EXIT_OK if rep.passed else EXIT_FAIL

    model = cfg.model
    h = entropy_rate(model).h
    M = p["M"] if p["M"] is not None else tune_band_start(model, h, p["eps"], p["N_max"])
    book = Codebook(build_chained_family(model, h, p["eps"], M, p["N_max"]))
    rep = rate_report(book, model, p["n"], p["trials"], p["seed"])
    emit_report(rep, "csv", d / "rate_report.csv")
    emit_report(rep, "json", d / "rate_report.json")
    say(f"mean rate {rep.mean_bits_per_symbol:.6f} bits/symbol (bound {rep.rate_bound:.6f}, h = {rep.entropy_bits:.6f} bits)")
    say(f"escape frequency {rep.escape_frequency:.6f} (exact {rep.exact_escape_prob:.6f}), LZ78 {rep.lz78_bits_per_symbol:.6f} bits/symbol")
    return EXIT_OK if rep.rate_ok and rep.escape_ok() else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chained-typical", description="Build and verify chained typical sets and projectors.")
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--mode", choices=MODES, help="override the config's mode")
    ap.add_argument("--out", help="output directory (default: config 'out' or the working directory)")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: config: cannot read {args.config}: {e.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.mode)
        return run(cfg, args.out, args.quiet)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as e:
        print(f"error: resource: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConstructionError, SelectionError) as e:
        print(f"error: construction: {e}", file=sys.stderr)
        return EXIT_FAIL
    except DomainError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

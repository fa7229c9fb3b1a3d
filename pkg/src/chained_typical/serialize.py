"""Text, CSV and JSON formats for families, states and reports.

CSV cells use 12 significant digits. JSON keeps full double precision
(non-finite floats are written as the strings ``"inf"``, ``"-inf"``,
``"nan"``) so that reports round-trip exactly. Both are written with a fixed
key and column order, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .chained_sets import BStarRecord, BStarReport, ChainedFamily
from .coder import RateReport
from .exceptions import DomainError
from .lattice import LatticeState, classical_markov, induced_process, iid_product, rotated_classical
from .process import Alphabet, ProcessModel, iid, markov
from .projectors import ChainedProjectorFamily, DepthTerms, QuantumRecord, QuantumReport
from .quantum_ops import SpectralSet, operator_from_json, operator_to_json

FAMILY_MAGIC = "chained-family 1"
CLASSICAL_COLUMNS = ("n", "cardinality_or_trace", "lower_bound", "upper_bound", "max_member_prob", "mass")
QUANTUM_COLUMNS = CLASSICAL_COLUMNS + ("q1_residual",)


def fmt12(x) -> str:
    """Fixed 12-significant-digit rendering; ``None`` becomes an empty cell."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _enc(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _enc(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_enc(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_enc(obj), sort_keys=True, indent=2) + "\n"


# ---- classical families ----


def family_to_text(family: ChainedFamily) -> str:
    """Header lines ``key value`` then one deepest-slice word per line (symbol indices)."""
    lines = [
        FAMILY_MAGIC,
        f"h {family.h!r}",
        f"eps {family.epsilon!r}",
        f"M {family.M}",
        f"N_max {family.n_max}",
        f"N_eps {family.N_eps}",
        f"alphabet {json.dumps(list(family.alphabet.symbols))}",
        f"words {family.leaves.shape[0]}",
    ]
    lines += [" ".join(str(int(a)) for a in row) for row in family.leaves]
    return "\n".join(lines) + "\n"


def family_from_text(text: str) -> ChainedFamily:
    lines = text.splitlines()
    if not lines or lines[0] != FAMILY_MAGIC:
        raise DomainError("not a chained family document")
    head: dict[str, str] = {}
    for i, key in enumerate(("h", "eps", "M", "N_max", "N_eps", "alphabet", "words"), start=1):
        k, _, v = lines[i].partition(" ")
        if k != key:
            raise DomainError(f"line {i + 1}: expected {key!r}, found {k!r}")
        head[k] = v
    body = lines[8:]
    if len(body) != int(head["words"]):
        raise DomainError(f"header announces {head['words']} words, found {len(body)}")
    N = int(head["N_max"])
    leaves = np.array([[int(a) for a in line.split()] for line in body], dtype=np.int64).reshape(len(body), N)
    alphabet = Alphabet(tuple(json.loads(head["alphabet"])))
    return ChainedFamily.from_leaves(alphabet, leaves, float(head["h"]), float(head["eps"]), int(head["M"]), int(head["N_eps"]))


# ---- models and states ----


def _matrix_json(A: np.ndarray):
    A = np.asarray(A)
    if np.iscomplexobj(A) and np.any(A.imag != 0):
        return [[[float(z.real), float(z.imag)] for z in row] for row in A]
    return np.real(A).astype(float).tolist()


def parse_matrix(obj, complex_ok: bool = True) -> np.ndarray:
    """Nested decimal lists; complex entries may be given as ``[re, im]`` pairs."""
    A = np.asarray(obj, dtype=float)
    if A.ndim == 3 and A.shape[-1] == 2 and complex_ok:
        return A[..., 0] + 1j * A[..., 1]
    if A.ndim != 2:
        raise DomainError(f"expected a matrix, got an array of shape {A.shape}")
    return A


def model_to_dict(model: ProcessModel) -> dict:
    if model.kind == "iid":
        return {"kind": "iid", "probs": model.probs.tolist(), "symbols": list(model.alphabet.symbols)}
    if model.kind == "markov":
        return {
            "kind": "markov",
            "transition": model.transition.tolist(),
            "initial": model.initial.tolist(),
            "symbols": list(model.alphabet.symbols),
        }
    raise DomainError(f"models of kind {model.kind!r} are not serializable")


def model_from_dict(d: dict) -> ProcessModel:
    kind = d.get("kind")
    if kind == "iid":
        return iid(d["probs"], symbols=d.get("symbols"))
    if kind == "markov":
        return markov(d["transition"], initial=d.get("initial"), symbols=d.get("symbols"))
    raise DomainError(f"unknown model kind {kind!r}; expected 'iid' or 'markov'")


def state_to_dict(state: LatticeState) -> dict:
    if state.kind == "iid_product":
        return {"kind": "iid_product", "rho": _matrix_json(state.rho)}
    d = {"kind": state.kind, "transition": state.chain.transition.tolist()}
    if state.kind == "rotated_classical":
        d["unitary"] = _matrix_json(state.unitary)
    return d


def state_from_dict(d: dict) -> LatticeState:
    kind = d.get("kind")
    if kind == "iid_product":
        return iid_product(parse_matrix(d["rho"]))
    if kind == "classical_markov":
        return classical_markov(parse_matrix(d["transition"], complex_ok=False))
    if kind == "rotated_classical":
        return rotated_classical(parse_matrix(d["transition"], complex_ok=False), parse_matrix(d["unitary"]))
    raise DomainError(f"unknown state kind {kind!r}; expected iid_product, classical_markov or rotated_classical")


# ---- projector families ----


def projector_family_to_dict(family: ChainedProjectorFamily) -> dict:
    V = family.spectral
    depths = {}
    for n in range(1, family.n_max + 1):
        t = family.terms[n]
        depths[str(n)] = {
            "m": t.m,
            "r": t.r,
            "prefixes": t.prefixes.tolist(),
            "tails": None if t.tails is None else [[[float(z.real), float(z.imag)] for z in row] for row in t.tails],
        }
    return {
        "state": state_to_dict(family.state),
        "eps": family.eps,
        "band_eps": family.band_eps,
        "l": family.l,
        "n_max": family.n_max,
        "s": family.s,
        "N_eps": family.N_eps,
        "core": family_to_text(family.core),
        "spectral": {
            "vectors": operator_to_json(V.vectors, V.site_dims),
            "eigenvalues": V.eigenvalues.tolist(),
            "reference_index": V.reference_index.tolist(),
        },
        "decomposition": depths,
    }


def projector_family_from_dict(d: dict) -> ChainedProjectorFamily:
    state = state_from_dict(d["state"])
    vecs, dims = operator_from_json(d["spectral"]["vectors"])
    V = SpectralSet(vecs, np.array(d["spectral"]["eigenvalues"]), dims, np.array(d["spectral"]["reference_index"]))
    l = int(d["l"])
    terms = {}
    for key, t in d["decomposition"].items():
        n, m, r = int(key), int(t["m"]), int(t["r"])
        pref = np.array(t["prefixes"], dtype=np.int64).reshape(len(t["prefixes"]), m)
        tails = None
        if t["tails"] is not None:
            A = np.array(t["tails"], dtype=float)
            tails = A[..., 0] + 1j * A[..., 1]
        terms[n] = DepthTerms(n, m, r, pref, tails)
    return ChainedProjectorFamily(
        state=state,
        eps=float(d["eps"]),
        band_eps=float(d["band_eps"]),
        l=l,
        n_max=int(d["n_max"]),
        s=float(d["s"]),
        spectral=V,
        induced=induced_process(state, l, V),
        core=family_from_text(d["core"]),
        terms=terms,
        N_eps=int(d["N_eps"]),
    )


# ---- reports ----


def report_rows(report) -> list[list[str]]:
    """CSV rows (header first) for a classical, quantum or rate report."""
    if isinstance(report, BStarReport):
        rows = [list(CLASSICAL_COLUMNS)]
        for r in report.records:
            rows.append([fmt12(v) for v in (r.n, r.cardinality, r.lower, r.upper, r.max_member_prob, r.mass)])
        return rows
    if isinstance(report, QuantumReport):
        rows = [list(QUANTUM_COLUMNS)]
        for r in report.records:
            vals = (r.n, r.trace, r.lower, r.upper, r.max_member_prob, r.mass, r.q1_residual)
            rows.append([fmt12(v) for v in vals])
        return rows
    if isinstance(report, RateReport):
        names = [f.name for f in fields(RateReport)]
        return [names, [fmt12(getattr(report, k)) for k in names]]
    raise DomainError(f"no CSV layout for {type(report).__name__}")


def report_to_csv(report) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(report_rows(report))
    return buf.getvalue()


def report_to_dict(report) -> dict:
    if isinstance(report, BStarReport):
        return {
            "type": "classical",
            "h": report.h,
            "eps": report.eps,
            "N_eps": report.N_eps,
            "slack": report.slack,
            "conditions": report.conditions,
            "passed": report.passed,
            "violations": dict(report.violations),
            "records": [asdict(r) for r in report.records],
        }
    if isinstance(report, QuantumReport):
        return {
            "type": "quantum",
            "s": report.s,
            "eps": report.eps,
            "N_eps": report.N_eps,
            "observed_N": report.observed_N,
            "conditions": report.conditions,
            "tight": {"q2": report.q2_tight, "q3": report.q3_tight},
            "passed": report.passed,
            "unchecked": report.unchecked,
            "records": [asdict(r) for r in report.records],
        }
    if isinstance(report, RateReport):
        d = asdict(report)
        d["type"] = "rate"
        d["rate_ok"] = report.rate_ok
        d["escape_ok"] = report.escape_ok()
        return d
    raise DomainError(f"no JSON layout for {type(report).__name__}")


def _floats(d: dict, cls) -> dict:
    # JSON may hold "inf" strings and ints where the dataclass wants floats
    out = {}
    for f in fields(cls):
        v = d[f.name]
        if f.type in ("float", "float | None") and v is not None:
            v = float(v)
        out[f.name] = v
    return out


def report_from_dict(d: dict):
    kind = d.get("type")
    if kind == "classical":
        recs = [BStarRecord(**_floats(r, BStarRecord)) for r in d["records"]]
        return BStarReport(float(d["h"]), float(d["eps"]), int(d["N_eps"]), recs, dict(d["violations"]), float(d["slack"]))
    if kind == "quantum":
        recs = [QuantumRecord(**_floats(r, QuantumRecord)) for r in d["records"]]
        return QuantumReport(float(d["s"]), float(d["eps"]), int(d["N_eps"]), recs)
    if kind == "rate":
        return RateReport(**_floats(d, RateReport))
    raise DomainError(f"unknown report type {kind!r}")


def report_to_json(report) -> str:
    return dumps(report_to_dict(report))


def report_from_json(text: str):
    return report_from_dict(json.loads(text))


def emit_report(report, fmt: str, path) -> Path:
    """Write ``report`` as ``csv`` or ``json`` to ``path``."""
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise DomainError(f"unknown report format {fmt!r}; expected csv or json")
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path

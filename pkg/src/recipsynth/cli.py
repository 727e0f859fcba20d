"""Command-line front end.

Exit codes: 0 success, 2 a diagnosis (not reciprocal, not passive, or a
netlist that does not match), 1 a usage or input error.
"""
from __future__ import annotations

import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import _mat as mx
from .behavior import (
    Behavior,
    check_positive_real_pair,
    check_reciprocity,
    is_controllable,
    partition_to_proper_symmetric,
    sample_grid,
)
from .passive import PassivityError, passive_sigsym_realize
from .polymat import PolyMatError
from .realize import RealizationError, realize, verify_certificate
from .sigsym import SymmetrizerError, sigsym_realize, sigsym_residuals
from .synth import (
    VERIFY_TOL,
    Netlist,
    NetlistError,
    SynthesisError,
    reduce_singular_q,
    split_improper,
    synthesize,
    verification_report,
)

log = logging.getLogger("recipsynth")

COMMANDS = ("check", "realize", "sigsym", "passive-realize", "synthesize", "verify")


class InputError(Exception):
    """Unreadable or inconsistent input; maps to exit status 1."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Path
    output: Path | None = None
    against: Path | None = None
    tol_psd: float = 1e-8
    tol_eq: float = 1e-9
    grid: int | None = None
    trace: bool = False
    fmt: str = "json"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if not (self.tol_psd > 0 and self.tol_eq > 0):
            raise InputError("tolerances must be positive")
        if self.grid is not None and self.grid < 1:
            raise InputError("--grid needs a positive sample count")
        if self.command == "verify" and self.against is None:
            raise InputError("verify needs --against BEHAVIOR")


# ---------------------------------------------------------------- input


def _load_json(path: Path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_behavior(path: Path) -> Behavior:
    data = _load_json(path)
    if isinstance(data, dict) and "behavior" in data:
        data = data["behavior"]
    try:
        return Behavior.from_json(data)
    except (PolyMatError, ValueError, TypeError, KeyError, ZeroDivisionError) as exc:
        raise InputError(f"{path}: not a behavior: {exc}") from exc


def load_netlist(path: Path) -> Netlist:
    data = _load_json(path)
    if isinstance(data, dict) and "netlist" in data:
        data = data["netlist"]
    try:
        return Netlist.from_json(data)
    except (NetlistError, ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{path}: not a netlist: {exc}") from exc


# ---------------------------------------------------------------- commands


def _clean(x):
    """JSON-safe copy: complex as [re, im], non-finite floats as strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _diagnosis(command: str, diagnosis: str, stage: str, detail: str = "", witness=None) -> tuple[dict, int]:
    return {"command": command, "status": "diagnosis", "diagnosis": diagnosis, "stage": stage,
            "detail": detail, "witness": witness}, 2


def _grid(cfg: RunConfig):
    return None if cfg.grid is None else sample_grid(cfg.grid)


def _cmd_check(cfg: RunConfig, b: Behavior) -> tuple[dict, int]:
    rec = check_reciprocity(b)
    rep = check_positive_real_pair(b, grid=_grid(cfg), tol=cfg.tol_eq)
    out = {"command": "check", "status": "ok", "n": b.n, "reciprocal": rec,
           "controllable": is_controllable(b), "positiveRealPair": rep.overall,
           "conditions": {"a": rep.condA.to_json(), "b": rep.condB.to_json(), "c": rep.condC.to_json()}}
    if not rec or rep.overall == "fail":
        out["status"] = "diagnosis"
        out["diagnosis"] = "not reciprocal" if not rec else "not passive"
        return out, 2
    return out, 0


def _cmd_realize(cfg: RunConfig, b: Behavior) -> tuple[dict, int]:
    sp = partition_to_proper_symmetric(b)
    ss, cert = realize(sp.Phat, sp.Qhat)
    return {"command": "realize", "status": "ok", "n": b.n,
            "split": {"T1": sp.T1.to_json(), "T2": sp.T2.to_json(), "r": sp.r},
            "realization": ss.to_json(), "states": ss.d,
            "certificate": verify_certificate(ss, cert, sp.Phat, sp.Qhat)}, 0


def _cmd_sigsym(cfg: RunConfig, b: Behavior) -> tuple[dict, int]:
    if not check_reciprocity(b):
        return _diagnosis("sigsym", "not reciprocal", "reciprocity", "P Q^T differs from Q P^T")
    sp = partition_to_proper_symmetric(b)
    try:
        sr = sigsym_realize(sp.Phat, sp.Qhat)
    except SymmetrizerError as exc:
        return _diagnosis("sigsym", "not symmetrizable", "symmetrizer", str(exc))
    res = sigsym_residuals(sr.ss, sr.cert.Sigma)
    return {"command": "sigsym", "status": "ok", "n": b.n,
            "split": {"T1": sp.T1.to_json(), "T2": sp.T2.to_json(), "r": sp.r},
            "realization": sr.to_json(), "states": sr.ss.d,
            "residuals": {"A": res[0], "C": res[1], "D": res[2]},
            "certificate": max(res, default=0.0) < cfg.tol_eq * max(1.0, _scale(sr.ss))}, 0


def _scale(ss) -> float:
    f = ss.to_float()
    return max((float(np.max(np.abs(m), initial=0.0)) for m in (f.A, f.B, f.C, f.D)), default=0.0)


def _passive_gate(command: str, cfg: RunConfig, b: Behavior):
    if not check_reciprocity(b):
        return _diagnosis(command, "not reciprocal", "reciprocity", "P Q^T differs from Q P^T")
    rep = check_positive_real_pair(b, grid=_grid(cfg), tol=cfg.tol_eq, confirm=False)
    for name, cond in (("a", rep.condA), ("b", rep.condB), ("c", rep.condC)):
        if cond.verdict == "fail":
            return _diagnosis(command, "not passive", f"positive-real condition ({name})", cond.detail, cond.witness)
    return None


def _cmd_passive(cfg: RunConfig, b: Behavior, observer) -> tuple[dict, int]:
    gate = _passive_gate("passive-realize", cfg, b)
    if gate:
        return gate
    try:
        split = reduce_singular_q(b)
        K, Pt, Qt = split_improper(split.P11, split.Q11)
        pr = passive_sigsym_realize(Pt, Qt, observer)
    except (PassivityError, SynthesisError) as exc:
        return _diagnosis("passive-realize", "not passive", exc.stage or "pipeline", str(exc), exc.witness)
    res = sigsym_residuals(pr.ss, pr.Sigma)
    out = {"command": "passive-realize", "status": "ok", "n": b.n, "r": split.r,
           "T": mx.fmt(split.T), "K": mx.fmt(K) if np.size(K) else [],
           "realization": pr.realization.to_json(), "states": pr.ss.d,
           "certificates": {
               "passiveMinEig": pr.psd_min_eig,
               "passive": pr.psd_min_eig >= -cfg.tol_psd * max(1.0, _scale(pr.ss)),
               "sigsymResidual": max(res, default=0.0),
               "sigsym": max(res, default=0.0) <= cfg.tol_psd * max(1.0, _scale(pr.ss)),
           },
           "trace": [s.kind for s in pr.pipeline.trace]}
    if cfg.trace:
        out["steps"] = [s.to_json() for s in pr.pipeline.trace]
    return out, 0


def _cmd_synthesize(cfg: RunConfig, b: Behavior, observer) -> tuple[dict, int]:
    res = synthesize(b, grid=_grid(cfg), observer=observer)
    if not res.success:
        r = res.report
        return _diagnosis("synthesize", r["diagnosis"], r["stage"], r["detail"], r["witness"])
    out = {"command": "synthesize", "status": "ok", "report": dict(res.report),
           "verification": verification_report(res.netlist, b, _verify_tol(cfg)),
           "netlist": res.netlist.to_json()}
    pr = res.realization
    if pr is not None:
        scale = max(1.0, _scale(pr.ss))
        out["report"]["certificates"] = {
            "passive": pr.psd_min_eig >= -cfg.tol_psd * scale,
            "sigsym": res.report["sigsymResidual"] <= cfg.tol_psd * scale,
        }
        if cfg.trace:
            out["steps"] = [s.to_json() for s in pr.pipeline.trace]
    return out, 0 if out["verification"]["verified"] else 2


def _verify_tol(cfg: RunConfig) -> float:
    # the sampled subspace comparison needs a looser floor than exact equality checks
    return max(cfg.tol_eq, VERIFY_TOL)


def _cmd_verify(cfg: RunConfig) -> tuple[dict, int]:
    nl = load_netlist(cfg.input)
    b = load_behavior(cfg.against)
    rep = verification_report(nl, b, _verify_tol(cfg))
    out = {"command": "verify", "status": "ok" if rep["verified"] else "diagnosis",
           "ports": nl.ports, "census": nl.census(), "verification": rep}
    if not rep["verified"]:
        out["diagnosis"] = "behavior mismatch"
        return out, 2
    return out, 0


def run(cfg: RunConfig) -> tuple[dict, int]:
    """Dispatch one command; returns the JSON payload and the exit status."""
    notes: list[str] = []

    def observer(msg: str) -> None:
        notes.append(msg)
        log.debug(msg)

    if cfg.command == "verify":
        payload, code = _cmd_verify(cfg)
    else:
        b = load_behavior(cfg.input)
        log.info("loaded %d-port behavior from %s", b.n, cfg.input)
        try:
            if cfg.command == "check":
                payload, code = _cmd_check(cfg, b)
            elif cfg.command == "realize":
                payload, code = _cmd_realize(cfg, b)
            elif cfg.command == "sigsym":
                payload, code = _cmd_sigsym(cfg, b)
            elif cfg.command == "passive-realize":
                payload, code = _cmd_passive(cfg, b, observer)
            else:
                payload, code = _cmd_synthesize(cfg, b, observer)
        except RealizationError as exc:
            raise InputError(f"{cfg.input}: {exc}") from exc
    if cfg.trace and notes:
        payload["log"] = notes
    return _clean(payload), code


# ---------------------------------------------------------------- rendering


def _num(x) -> str:
    if isinstance(x, str) and "/" in x:
        num, den = x.split("/")
        x = int(num) / int(den)
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return f"{float(x):.6g}"
    return str(x)


def _matrix(m) -> list[str]:
    if not m or not m[0]:
        return ["  []"]
    cells = [[_num(v) for v in row] for row in m]
    width = max(len(c) for row in cells for c in row)
    return ["  [" + " ".join(c.rjust(width) for c in row) + "]" for row in cells]


def _polymat(pm: dict) -> list[str]:
    from .polymat import PolyMat

    m = PolyMat.from_json(pm)
    return ["  [" + ", ".join(str(e) for e in row) + "]" for row in m.entries] or ["  []"]


def _witness(w) -> str:
    if isinstance(w, list) and len(w) == 2 and all(isinstance(v, (int, float)) for v in w):
        re, im = w
        return _num(re) if im == 0 else f"{_num(re)}{'+' if im >= 0 else '-'}{_num(abs(im))}j"
    return _num(w) if w is not None else "none"


def _passfail(ok) -> str:
    return "pass" if ok else "fail"


def render_report(result: dict) -> str:
    """Deterministic plain-text summary of a command payload."""
    cmd = result.get("command", "?")
    lines = [f"command: {cmd}"]
    n = result.get("n", result.get("ports", result.get("report", {}).get("ports")))
    if n == 0:
        lines.append("trivial behavior (no ports)")
    if result.get("status") == "diagnosis" and "stage" in result:
        lines.append(f"diagnosis: {result['diagnosis']}")
        lines.append(f"failing check: {result['stage']}")
        if result.get("detail"):
            lines.append(f"detail: {result['detail']}")
        if result.get("witness") is not None:
            lines.append(f"witness lambda: {_witness(result['witness'])}")
        return "\n".join(lines) + "\n"
    if cmd == "check":
        lines.append(f"ports: {n}")
        lines.append(f"reciprocal: {str(result['reciprocal']).lower()}")
        lines.append(f"controllable: {str(result['controllable']).lower()}")
        lines.append(f"positive-real pair: {result['positiveRealPair']}")
        for key, cond in result["conditions"].items():
            extra = f", witness {_witness(cond['witness'])}" if cond.get("witness") is not None else ""
            detail = f" ({cond['detail']})" if cond.get("detail") else ""
            lines.append(f"  condition ({key}): {cond['verdict']}{extra}{detail}")
        if result.get("diagnosis"):
            lines.append(f"diagnosis: {result['diagnosis']}")
    elif cmd in ("realize", "sigsym", "passive-realize"):
        real = result["realization"]
        lines.append(f"ports: {n}")
        lines.append(f"states: {result['states']}")
        for key in ("A", "B", "C", "D"):
            lines.append(f"{key} =")
            lines.extend(_matrix(real[key]))
        if "Sigma" in real:
            lines.append("Sigma = diag(" + ", ".join(str(s) for s in real["Sigma"]) + ")")
        if cmd == "realize":
            lines.append(f"certificate: {_passfail(result['certificate'])}")
        elif cmd == "sigsym":
            r = result["residuals"]
            lines.append(f"signature symmetry: {_passfail(result['certificate'])} "
                         f"(residuals {_num(r['A'])}, {_num(r['C'])}, {_num(r['D'])})")
        else:
            c = result["certificates"]
            lines.append(f"passivity certificate: {_passfail(c['passive'])} (min eigenvalue {_num(c['passiveMinEig'])})")
            lines.append(f"signature symmetry: {_passfail(c['sigsym'])} (residual {_num(c['sigsymResidual'])})")
            lines.append("reduction trace: " + (", ".join(result["trace"]) or "none"))
    elif cmd == "synthesize":
        rep = result["report"]
        lines.append(f"ports: {rep['ports']}")
        census = rep["census"]
        lines.append("elements: " + ", ".join(f"{k}={census[k]}" for k in ("R", "L", "C", "T", "S", "O")))
        if "states" in rep:
            lines.append(f"reactive states: {rep['states']}")
            lines.append("Sigma = diag(" + ", ".join(str(s) for s in rep["Sigma"]) + ")")
            c = rep["certificates"]
            lines.append(f"passivity certificate: {_passfail(c['passive'])} (min eigenvalue {_num(rep['passiveMinEig'])})")
            lines.append(f"signature symmetry: {_passfail(c['sigsym'])} (residual {_num(rep['sigsymResidual'])})")
            lines.append("reduction trace: " + (", ".join(rep["trace"]) or "none"))
        v = result["verification"]
        lines.append(f"verification ({v['method']}): {_passfail(v['verified'])}, gap {_num(v['gap'])}")
        lines.append("netlist:")
        lines.extend("  " + ln for ln in Netlist.from_json(result["netlist"]).to_text().splitlines())
    elif cmd == "verify":
        v = result["verification"]
        census = result["census"]
        lines.append(f"ports: {result['ports']}")
        lines.append("elements: " + ", ".join(f"{k}={census[k]}" for k in ("R", "L", "C", "T", "S", "O")))
        lines.append(f"verification ({v['method']}): {_passfail(v['verified'])}, gap {_num(v['gap'])}")
    return "\n".join(lines) + "\n"


def dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- click wiring


def _setup_logging() -> None:
    level = os.environ.get("RECIP_SYNTH_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _emit(cfg: RunConfig) -> int:
    payload, code = run(cfg)
    if cfg.output is not None:
        cfg.output.write_text(dumps(payload))
    click.echo(render_report(payload) if cfg.fmt == "text" else dumps(payload), nl=False)
    return code


_common = [
    click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), help="Write the JSON artifact here."),
    click.option("--tol-psd", type=float, default=1e-8, show_default=True, help="PSD certificate tolerance."),
    click.option("--tol-eq", type=float, default=1e-9, show_default=True, help="Equality check tolerance."),
    click.option("--grid", type=int, default=None, help="Number of condition (a) sample points."),
    click.option("--trace", is_flag=True, help="Include reduction steps and pipeline notes."),
    click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True),
]


def _options(f):
    for opt in reversed(_common):
        f = opt(f)
    return f


@click.group()
def main():
    """Reciprocal passive network synthesis from behaviors."""


def _command(name: str, help_text: str):
    @main.command(name, help=help_text)
    @click.argument("input", type=click.Path(path_type=Path))
    @_options
    def cmd(input, output, tol_psd, tol_eq, grid, trace, fmt):
        cfg = RunConfig(name, input, output, None, tol_psd, tol_eq, grid, trace, fmt)
        sys.exit(_emit(cfg))

    return cmd


_command("check", "Reciprocity, controllability and positive-real pair report.")
_command("realize", "State-space realization with its behavioral certificate.")
_command("sigsym", "Signature-symmetric realization of a reciprocal behavior.")
_command("passive-realize", "Passive and signature-symmetric realization.")
_command("synthesize", "RLCT netlist realizing the behavior.")


@main.command("verify", help="Check that a netlist realizes a behavior.")
@click.argument("input", type=click.Path(path_type=Path))
@click.option("--against", required=True, type=click.Path(path_type=Path), help="Behavior JSON file.")
@_options
def _verify(input, against, output, tol_psd, tol_eq, grid, trace, fmt):
    cfg = RunConfig("verify", input, output, against, tol_psd, tol_eq, grid, trace, fmt)
    sys.exit(_emit(cfg))


def entry(argv: list[str] | None = None) -> int:
    """Console entry point with the exit-status contract (usage errors give 1, not click's 2)."""
    _setup_logging()
    try:
        main.main(args=argv, prog_name="recipsynth", standalone_mode=False)
    except SystemExit as exc:
        return int(exc.code or 0)
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.ctx.get_help() if exc.ctx else str(exc), err=True)
        return 1
    except click.UsageError as exc:
        exc.exit_code = 1
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(entry())

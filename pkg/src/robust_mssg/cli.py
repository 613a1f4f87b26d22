"""Command-line front end (``mssg``)."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .abf import Abf, AbfError
from .alloc import NoLevelPointError
from .core import (
    CoalitionStructure,
    build_core_solution,
    default_gamma_deviation,
    gamma_deviation,
    level_structure,
    verify_alpha_core,
)
from .equilibrium import ConstructionError, PreconditionError, calc_ne, verify_ne
from .game import GameError, GameSpec, StrategyProfile
from .lp import InfeasibleError
from .oracle import EXAMPLE_IDS, GridTooLargeError, example
from .robustness import certify_robust

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_PRECONDITION = 0, 1, 2, 3
COMMANDS = ("solve-ne", "solve-core", "verify", "perturb-sweep", "examples")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    game_path: str | None = None
    delta: float | None = None
    epsilon: float | None = None
    scale: float | None = None
    grid_step: float | None = None
    eta: float = 0.001
    samples: int = 100
    rng_seed: int = 0
    output_dir: str | None = None
    kind: str = "ne"
    deviators: list = field(default_factory=list)
    deviation: list | None = None
    solution: str | None = None
    zeta: float | None = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.command != "examples" and not self.game_path:
            raise UsageError(f"{self.command} needs --game (a JSON file or examples:<id>)")
        for name in ("delta", "scale", "grid_step"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise UsageError("--epsilon must lie in (0, 1)")
        if self.eta < 0:
            raise UsageError("--eta must be non-negative")
        if self.samples < 1:
            raise UsageError("--samples must be at least 1")
        if self.command in ("verify", "perturb-sweep") and self.grid_step is None:
            raise UsageError(f"{self.command} needs --grid")
        if self.command == "verify" and self.kind == "gamma" and not self.deviators:
            raise UsageError("verify --kind gamma needs --deviators")


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def load_game(spec: str):
    """A game file path or ``examples:<id>``; returns the game, a default ABF and the fixture id."""
    if spec.startswith("examples:"):
        key = spec.split(":", 1)[1]
        if key not in EXAMPLE_IDS:
            raise UsageError(f"unknown example {key!r}; choose one of {', '.join(EXAMPLE_IDS)}")
        ex = example(key)
        return ex.game, ex.abf, key
    path = Path(spec)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read game file {path}: {exc.strerror}") from exc
    try:
        return GameSpec.from_json(text), None, None
    except json.JSONDecodeError as exc:
        raise UsageError(f"game file {path} is not valid JSON: {exc}") from exc


def resolve_abf(cfg: RunConfig, default: Abf | None) -> Abf:
    if cfg.delta is None and cfg.epsilon is None and cfg.scale is None:
        if default is None:
            raise UsageError("this game has no default attacker model; pass --delta and --epsilon")
        return default
    if cfg.delta is None or cfg.epsilon is None:
        raise UsageError("--delta and --epsilon must be given together")
    return Abf.certified(cfg.delta, cfg.epsilon, cfg.scale)


def _load_solution(path: str, kind: str):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read solution file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"solution file {path} is not valid JSON: {exc}") from exc
    zeta = doc.get("zeta", doc.get("report", {}).get("zeta"))
    try:
        if kind == "ne":
            prof = doc.get("profile", doc)
            return StrategyProfile.from_dict(prof), zeta
        cs = doc.get("structure", doc)
        return CoalitionStructure.from_dict(cs), zeta
    except (KeyError, TypeError) as exc:
        raise UsageError(f"solution file {path} lacks the expected fields ({exc})") from exc


def _emit(cfg: RunConfig, name: str, text: str, summary: str) -> None:
    out, err = sys.stdout, sys.stderr
    if cfg.output_dir:
        d = Path(cfg.output_dir)
        try:
            d.mkdir(parents=True, exist_ok=True)
            (d / name).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {d / name}: {exc.strerror}") from exc
        print(f"{summary}\nwrote {d / name}", file=out)
    else:
        out.write(text)
        print(summary, file=err)


def _solve_ne(cfg, g, abf, key):
    rep = calc_ne(g, abf)
    if cfg.grid_step:
        rep.verification = verify_ne(rep.profile, rep.zeta, g, abf, cfg.grid_step)
    if key == "worked_robust":
        ref = dict(example(key).reference)
        ref["verification"] = verify_ne(
            StrategyProfile(ref["profile"], g.resources), ref["zeta"], g, abf, cfg.grid_step or 0.005
        ).as_dict()
        rep.reference = ref
    prof = np.round(rep.profile.allocations, 6).tolist()
    summary = f"zeta-NE: profile {prof}, t* = {rep.t_star}, zeta = {rep.zeta:.6g}"
    _emit(cfg, "solve_ne.json", _dump(rep.as_dict()), summary)
    if rep.verification is not None and not rep.verification.passed:
        return EXIT_FAIL
    return EXIT_OK


def _solve_core(cfg, g, abf):
    cs, rep = build_core_solution(g, abf)
    if cfg.grid_step:
        rep.verification = verify_alpha_core(cs, rep.zeta, g, abf, cfg.grid_step).as_dict()
    doc = {"structure": cs.to_dict(), "report": rep.as_dict()}
    summary = (
        f"alpha-core: distribution {np.round(rep.realized, 6).tolist()}, "
        f"utilities {np.round(rep.utilities, 6).tolist()}, zeta = {rep.zeta:.6g}"
    )
    _emit(cfg, "solve_core.json", _dump(doc), summary)
    if rep.verification is not None and not rep.verification["passed"]:
        return EXIT_FAIL
    return EXIT_OK


def _solution_for(cfg, g, abf, kind):
    if cfg.solution:
        sol, zeta = _load_solution(cfg.solution, kind)
    elif kind == "ne":
        rep = calc_ne(g, abf)
        sol, zeta = rep.profile, rep.zeta
    else:
        sol, rep = build_core_solution(g, abf)
        zeta = rep.zeta
    if cfg.zeta is not None:
        zeta = cfg.zeta
    if zeta is None:
        raise UsageError("no zeta in the solution file; pass --zeta")
    return sol, zeta


def _verify(cfg, g, abf):
    if cfg.kind == "gamma":
        D = [i - 1 for i in cfg.deviators]
        if any(not 0 <= i < g.num_defenders for i in D):
            raise UsageError(f"--deviators must be between 1 and {g.num_defenders}")
        cs = level_structure(g)
        if cfg.solution:
            cs, _ = _load_solution(cfg.solution, "alpha")
        x = default_gamma_deviation(g, D) if cfg.deviation is None else np.asarray(cfg.deviation, dtype=float)
        if x.shape != (g.num_targets,):
            raise UsageError(f"--deviation needs {g.num_targets} comma-separated values")
        ev = gamma_deviation(cs, D, x, g, abf, cfg.grid_step)
        doc = {"kind": "gamma", "deviators": cfg.deviators, "deviation": x.tolist(), "evidence": ev.as_dict()}
        ok = ev.confirmed
        summary = (
            f"gamma deviation by {cfg.deviators}: {'confirmed' if ok else 'not confirmed'}"
            f" (worst deviator utilities {np.round(ev.worst_utilities, 6).tolist()}"
            f" vs baseline {np.round(ev.baseline, 6).tolist()})"
        )
    elif cfg.kind == "ne":
        prof, zeta = _solution_for(cfg, g, abf, "ne")
        ev = verify_ne(prof, zeta, g, abf, cfg.grid_step)
        doc = {"kind": "ne", "profile": prof.to_dict(), "evidence": ev.as_dict()}
        ok = ev.passed
        summary = f"zeta-NE check: {'pass' if ok else 'fail'} (max gain {ev.max_gain:.6g}, threshold {zeta + ev.slack:.6g})"
    else:
        cs, zeta = _solution_for(cfg, g, abf, "alpha")
        ev = verify_alpha_core(cs, zeta, g, abf, cfg.grid_step)
        doc = {"kind": "alpha", "structure": cs.to_dict(), "evidence": ev.as_dict()}
        ok = ev.passed
        worst = max(d["gain"] for d in ev.deviations)
        summary = f"alpha-core check: {'pass' if ok else 'fail'} (largest guaranteed gain {worst:.6g}, threshold {zeta + ev.slack:.6g})"
    _emit(cfg, "verify.json", _dump(doc), summary)
    return EXIT_OK if ok else EXIT_FAIL


def _sweep(cfg, g, abf):
    kind = "alpha" if cfg.kind in ("alpha", "alpha_core") else "ne"
    sol, zeta = _solution_for(cfg, g, abf, kind)
    ev = certify_robust(
        sol, zeta, g, abf, cfg.eta, cfg.samples, cfg.grid_step,
        kind="ne" if kind == "ne" else "alpha_core", rng_seed=cfg.rng_seed,
    )
    summary = (
        f"robustness sweep: {'pass' if ev.passed else 'fail'} on {len(ev.samples)} samples"
        f" (max gain {ev.max_gain:.6g}, threshold {ev.threshold:.6g})"
    )
    _emit(cfg, "sweep.csv", ev.to_csv(), summary)
    return EXIT_OK if ev.passed else EXIT_FAIL


def _examples(cfg):
    d = Path(cfg.output_dir or ".")
    try:
        d.mkdir(parents=True, exist_ok=True)
        for key in EXAMPLE_IDS:
            ex = example(key)
            (d / f"{key}.json").write_text(_dump(ex.game.to_dict()))
            if ex.abf is not None:
                (d / f"{key}.abf.json").write_text(_dump(ex.abf.to_dict()))
    except OSError as exc:
        raise UsageError(f"cannot write examples to {d}: {exc.strerror}") from exc
    print(f"wrote {len(EXAMPLE_IDS)} example games to {d}")
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
        if cfg.command == "examples":
            return _examples(cfg)
        g, default_abf, key = load_game(cfg.game_path)
        abf = resolve_abf(cfg, default_abf)
        if cfg.command == "solve-ne":
            return _solve_ne(cfg, g, abf, key)
        if cfg.command == "solve-core":
            return _solve_core(cfg, g, abf)
        if cfg.command == "verify":
            return _verify(cfg, g, abf)
        return _sweep(cfg, g, abf)
    except (PreconditionError, NoLevelPointError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (UsageError, GameError, AbfError, GridTooLargeError, InfeasibleError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


def _int_list(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mssg", description="Robust solutions for multi-defender security games.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid_help="grid step for deviation search"):
        sp.add_argument("--game", dest="game_path", required=True, help="game JSON file or examples:<id>")
        sp.add_argument("--delta", type=float, help="certified utility gap of the attacker model")
        sp.add_argument("--epsilon", type=float, help="certified probability bound of the attacker model")
        sp.add_argument("--scale", type=float, help="softmax scale (derived from delta, epsilon if omitted)")
        sp.add_argument("--grid", dest="grid_step", type=float, help=grid_help)
        sp.add_argument("--output-dir", help="write artifacts here instead of stdout")
        sp.add_argument("--seed", dest="rng_seed", type=int, default=0)

    common(sub.add_parser("solve-ne", help="construct an approximate Nash equilibrium"),
           "also verify the profile at this grid step")
    common(sub.add_parser("solve-core", help="construct an approximate alpha-core solution"),
           "also verify the structure at this grid step")
    v = sub.add_parser("verify", help="grid-verify a solution or a coalition deviation")
    common(v)
    v.add_argument("--kind", choices=["ne", "alpha", "gamma"], default="ne")
    v.add_argument("--deviators", type=_int_list, default=[], help="1-based defender indices, e.g. 1,2")
    v.add_argument("--deviation", type=_float_list, help="pooled deviation coverage (gamma); default spreads the budget")
    v.add_argument("--solution", help="JSON written by solve-ne or solve-core")
    v.add_argument("--zeta", type=float, help="override the tolerance to verify against")
    s = sub.add_parser("perturb-sweep", help="re-verify a solution on randomly perturbed games")
    common(s)
    s.add_argument("--kind", choices=["ne", "alpha"], default="ne")
    s.add_argument("--eta", type=float, default=0.001)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--solution")
    s.add_argument("--zeta", type=float)
    e = sub.add_parser("examples", help="write the built-in example games as JSON")
    e.add_argument("--output-dir", default=".")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    cfg = RunConfig(**vars(ns))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

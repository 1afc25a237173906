"""Command line front end: ``build``, ``stats``, ``resume`` and ``export``.

Every failure prints one line ``ERROR <code> <stage> <detail>`` on stderr
and exits with status 1 (``-`` stands for "no particular stage").
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .chain import Chain, StageState
from .exact import (ExactError, IntervalSet, SetOutsideDomain, set_default_budget, union_all)
from .io import (PLOT_COLUMNS, ConfigError, MissingSnapshot, RunConfig, atomic_write,
                 parse_set_text, plot_text, read_csv, read_snapshots, write_csv,
                 write_snapshot)
from .rankone import RankOneSpec, RigiditySequence, build_rank_one, powers_of_two
from .scheduler import Scheduler, default_j
from . import stats

DEFAULT_OUT = "towerplex-out"
_DEFAULT_DEPTH = {"odometer": 10, "chacon": 7}


class StageError(Exception):
    """A construction error tagged with the stage being processed."""

    def __init__(self, stage, exc: BaseException):
        super().__init__(str(exc))
        self.stage = stage
        self.exc = exc


# -- chain orchestration -------------------------------------------------------------------


def make_starter(cfg: RunConfig):
    depth = cfg.starter_depth or _DEFAULT_DEPTH.get(cfg.starter_kind, len(cfg.starter_cuts))
    if cfg.starter_kind == "odometer":
        spec = RankOneSpec.odometer(depth)
    elif cfg.starter_kind == "chacon":
        spec = RankOneSpec.chacon(depth)
    else:
        try:
            spec = RankOneSpec.custom(cfg.starter_cuts, cfg.starter_spacers)
        except ValueError as exc:
            raise ConfigError(f"starter: {exc}") from None
        depth = min(depth, len(spec))
    system = build_rank_one(spec, depth)
    if cfg.starter_normalize:
        system = system.normalized()
    return system


def starter_partition(system) -> list[IntervalSet]:
    """Levels of the depth-2 column plus whatever they leave uncovered."""
    cells = system.levels(min(2, system.stage))
    rest = system.space - union_all(cells)
    return cells + ([rest] if rest else [])


def make_scheduler(cfg: RunConfig) -> Scheduler | None:
    if cfg.schedule_kind != "auto":
        return None
    rho = None
    if cfg.check_rigidity:
        src = cfg.schedule_rho
        if src == "powers_of_two":
            top = max(cfg.search_cap, 2).bit_length()
            rho = powers_of_two(0, top)
        elif isinstance(src, tuple):
            rho = RigiditySequence(tuple(int(t) for t in src))
        else:
            raise ConfigError("schedule.rho must be \"powers_of_two\" or a list of integers")
    return Scheduler(search_cap=cfg.search_cap, vector_budget=cfg.vector_budget,
                     check_rigidity=cfg.check_rigidity, rho=rho,
                     delta=cfg.delta_override() or None)


class Runner:
    """Builds a chain stage by stage, snapshotting after every step."""

    def __init__(self, cfg: RunConfig, out_dir):
        self.cfg = cfg
        self.out = Path(out_dir)
        set_default_budget(cfg.piece_budget)
        self.starter = make_starter(cfg)
        self.P1 = starter_partition(self.starter)
        self.scheduler = make_scheduler(cfg)
        self.chain = Chain(self.starter, self.P1)
        self.j: list = []

    def _pick(self, n: int, R, cells, muX) -> tuple[int, Fraction, dict]:
        if self.scheduler is None:
            h, eps = self.cfg.fixed_schedule(n)
            return h, eps, {}
        h, eps = self.scheduler.choose(n, R, cells, muX)
        p = self.scheduler.params
        return h, eps, dict(M=p.M[-1], delta=p.delta[-1], j=p.j[-1])

    def _tag_last(self, extra: dict) -> None:
        j = extra.pop("j", None)
        self.chain.stages[-1] = replace(self.chain.stages[-1], **extra)
        self.j.append(j)

    def start(self) -> None:
        try:
            h, eps, extra = self._pick(1, self.starter.map, self.P1, self.starter.space.measure)
            self.chain.start(h, eps, self.cfg.mode)
        except ExactError as exc:
            raise StageError(1, exc) from exc
        self._tag_last(extra)
        self.snapshot()

    def resume(self) -> None:
        snaps = read_snapshots(self.out)
        states = [s.state for s in snaps]
        if states[0].mode != self.cfg.mode:
            raise ConfigError(f"snapshots were built in {states[0].mode} mode, config asks for {self.cfg.mode}")
        self.chain.stages = states
        self.j = [s.j for s in snaps]
        if self.scheduler is not None:
            p = self.scheduler.params
            for s, j in zip(states, self.j):
                if s.M is None:
                    raise ConfigError("snapshots were built with a fixed schedule")
                p.M.append(s.M)
                p.delta.append(s.delta)
                p.eps.append(s.eps)
                p.h.append(s.h)
                p.j.append(j if j is not None else default_j(s.n, self.scheduler.vector_budget))

    def advance(self) -> None:
        n = self.chain.depth + 1
        extra: dict = {}

        def choose(nxt):
            done = self.chain.stages[-1]
            h, eps, more = self._pick(n, nxt["R"], done.P_prime, nxt["X"].measure)
            extra.update(more)
            return h, eps

        try:
            self.chain.advance(choose)
        except ExactError as exc:
            # the failing step multiplexes the last open stage
            raise StageError(n - 1, exc) from exc
        self._tag_last(extra)
        self.snapshot()

    def run_to(self, N: int) -> None:
        if not self.chain.stages:
            self.start()
        while self.chain.depth < N:
            self.advance()

    def snapshot(self) -> None:
        for st, j in zip(self.chain.stages, self.j):
            write_snapshot(self.out, st, j=j)


def load_chain(cfg: RunConfig, out_dir) -> Chain:
    r = Runner(cfg, out_dir)
    r.resume()
    return r.chain


# -- diagnostics -------------------------------------------------------------------------


def _set_or(text: str | None, default: IntervalSet, domain: IntervalSet, key: str) -> IntervalSet:
    S = default if text is None else parse_set_text(text)
    if not S.issubset(domain):
        raise SetOutsideDomain(f"{key} is not inside the domain of T")
    return S


def diagnostics(cfg: RunConfig, chain: Chain, out_dir) -> list[tuple[str, ExactError]]:
    """Write the five CSV reports; returns the diagnostics that failed."""
    out = Path(out_dir)
    n = cfg.stats_stage or chain.depth
    T = chain.T(n)
    dom = T.domain
    X1 = chain.stage(1).X
    half = IntervalSet.of(X1.lo, X1.lo + X1.measure / 2)
    failures = []

    def run(name, header, rational, make_rows):
        rows: list = []
        try:
            make_rows(rows)
        except ExactError as exc:
            failures.append((name, exc))
        write_csv(out / f"{name}.csv", header, rows, rational)

    def weights(rows):
        F = _set_or(cfg.stats_F, X1, dom, "stats.F")
        w = stats.weight_sequence(T, F, cfg.stats_K)
        rows.extend((k, w.u[k], w.a[k]) for k in range(cfg.stats_K))

    def report_rows(rows, rep):
        rows.extend((i, t, s, rep.normalizer) for i, (t, s) in enumerate(zip(rep.terms, rep.partial_sums)))

    def rwm(rows):
        F = _set_or(cfg.stats_F, X1, dom, "stats.F")
        A = _set_or(cfg.stats_A, half, dom, "stats.A")
        B = _set_or(cfg.stats_B, A, dom, "stats.B")
        report_rows(rows, stats.rwm_report(T, F, A, B, cfg.stats_N))

    def rigidity(rows):
        A = _set_or(cfg.stats_A, half, dom, "stats.A")
        rhos = list(cfg.stats_rho) or [2 ** m for m in range(cfg.stats_N.bit_length())]
        rows.extend(zip(rhos, stats.rigidity_deviations(T, A, rhos)))

    def power(rows):
        A = _set_or(cfg.stats_A, half, dom, "stats.A")
        spec = stats.ProductSpec(tuple(cfg.stats_vector))
        rep = stats.product_scaled_report(spec, T, A, cfg.stats_N, dom.measure ** len(spec))
        report_rows(rows, rep)

    def sweep(rows):
        F = _set_or(cfg.stats_sweep_F, X1, dom, "stats.sweep_F")
        rows.extend(enumerate(stats.sweep_series(T, F, cfg.stats_sweep_N)))

    report = ["i", "term", "partial_sum", "normalizer"]
    run("weights", ["k", "u_k", "a_k"], ["u_k", "a_k"], weights)
    run("rwm", report, report[1:], rwm)
    run("rigidity", ["rho", "deviation"], ["deviation"], rigidity)
    run("power", report, report[1:], power)
    run("sweep", ["K", "unswept"], ["unswept"], sweep)
    return failures


def export_plots(out_dir) -> list[Path]:
    out = Path(out_dir)
    written = []
    for name, (x, y) in PLOT_COLUMNS.items():
        src = out / f"{name}.csv"
        if not src.exists():
            continue
        header, rows = read_csv(src)
        dst = out / f"{name}.xy.csv"
        atomic_write(dst, plot_text(header, rows, x, y))
        written.append(dst)
    if not written:
        raise MissingSnapshot(f"no reports to export in {out}")
    return written


# -- argument handling -------------------------------------------------------------------


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.stages is not None:
        cfg.stages = args.stages
    if args.piece_budget is not None:
        cfg.piece_budget = args.piece_budget
    if args.mode is not None:
        cfg.mode = args.mode
    cfg.validate()
    return cfg


def _out(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.out or DEFAULT_OUT)


def cmd_build(cfg: RunConfig, out_dir) -> Chain:
    r = Runner(cfg, out_dir)
    r.run_to(cfg.stages)
    return r.chain


def cmd_resume(cfg: RunConfig, out_dir) -> Chain:
    r = Runner(cfg, out_dir)
    r.resume()
    r.run_to(max(cfg.stages, r.chain.depth))
    return r.chain


def cmd_stats(cfg: RunConfig, out_dir) -> list:
    return diagnostics(cfg, load_chain(cfg, out_dir), out_dir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="towerplex", description="Exact towerplex chain simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("build", "build stages 1..N and snapshot them"),
                       ("stats", "write diagnostic CSVs for the snapshotted chain"),
                       ("resume", "continue a snapshotted chain up to N stages"),
                       ("export", "write (x, y) plot data from the diagnostic CSVs")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="TOML run configuration")
        s.add_argument("--out", help=f"output directory (default {DEFAULT_OUT})")
        s.add_argument("--stages", type=int, help="number of stages N")
        s.add_argument("--piece-budget", type=int, dest="piece_budget",
                       help="maximum pieces per map or set")
        s.add_argument("--mode", choices=("uniform", "literal"), help="transfer-measure formula")
    return p


def _error(code: str, stage, detail: str) -> int:
    detail = " ".join(str(detail).split())
    print(f"ERROR {code} {stage} {detail}", file=sys.stderr)
    return 1


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        out = _out(args, cfg)
        if args.command == "build":
            chain = cmd_build(cfg, out)
            print(f"built {chain.depth} stages in {out}; kappa {chain.kappa}")
        elif args.command == "resume":
            chain = cmd_resume(cfg, out)
            print(f"chain has {chain.depth} stages in {out}; kappa {chain.kappa}")
        elif args.command == "stats":
            failures = cmd_stats(cfg, out)
            for name, exc in failures:
                _error(getattr(exc, "code", "ERROR"), "-", f"{name}: {exc}")
            if failures:
                return 1
            print(f"wrote diagnostics to {out}")
        else:
            for path in export_plots(out):
                print(path)
    except StageError as exc:
        return _error(getattr(exc.exc, "code", type(exc.exc).__name__), exc.stage, exc.exc)
    except ExactError as exc:
        return _error(getattr(exc, "code", "ERROR"), "-", exc)
    except OSError as exc:
        return _error("IO", "-", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())

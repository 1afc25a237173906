"""Run configuration, stage snapshots and CSV / plot-data writers.

Snapshot layout (one file per stage, ``stage_NNN.snap``)::

    stage n b h eps d kappa
    schedule M delta j ratio mode
    @X <lines>
    lo hi
    ...
    @Pprime <lines> <parts>
    k lo hi
    ...
    @R <lines>
    lo hi slope offset

Values are exact rationals in ``p/q`` form; ``-`` marks a field that is not
defined yet (an open stage has no ``d``, ``kappa`` or partitions).  Every
file is written to a temporary name and renamed into place.
"""
from __future__ import annotations

import csv
import io as _stdio
import os
import sys
import tempfile
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Context, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exact import (ExactError, Interval, IntervalSet, PiecewiseAffineMap, format_rat,
                    parse_map_lines, parse_rat, parse_set_lines, to_set_lines)
from .chain import MODES, StageState


class ConfigError(ExactError):
    code = "CONFIG"


class MissingSnapshot(ExactError):
    code = "MISSING_SNAPSHOT"


class CorruptSnapshot(ExactError):
    code = "CORRUPT_SNAPSHOT"

    def __init__(self, path, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = str(path)


# -- decimals -------------------------------------------------------------------------

_DEC = Context(prec=12, rounding=ROUND_HALF_EVEN)


def approx(q) -> str:
    """``q`` rounded half-even to 12 significant digits, in ``e`` notation."""
    q = Fraction(q)
    if not q:
        return "0.00000000000e+0"
    d = _DEC.divide(Decimal(q.numerator), Decimal(q.denominator))
    return f"{d:.11e}"


# -- configuration ------------------------------------------------------------------


def parse_set_text(text: str) -> IntervalSet:
    """``"0 1/2; 3/4 1"`` -> the union of the listed half-open intervals."""
    chunks = [c for c in text.split(";") if c.strip()]
    try:
        return parse_set_lines(chunks)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad interval set {text!r}: {exc}") from None


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


_KNOWN = {
    "stages", "mode", "piece_budget", "out",
    "starter.kind", "starter.depth", "starter.cuts", "starter.spacers", "starter.normalize",
    "schedule.kind", "schedule.h", "schedule.eps", "schedule.delta", "schedule.vector_budget",
    "schedule.search_cap", "schedule.check_rigidity", "schedule.rho",
    "stats.stage", "stats.F", "stats.K", "stats.A", "stats.B", "stats.N", "stats.rho",
    "stats.vector", "stats.sweep_F", "stats.sweep_N",
}


@dataclass
class RunConfig:
    stages: int = 3
    mode: str = "uniform"
    piece_budget: int = 1_000_000
    out: str | None = None
    starter_kind: str = "odometer"
    starter_depth: int | None = None
    starter_cuts: tuple = ()
    starter_spacers: tuple = ()
    starter_normalize: bool = True
    schedule_kind: str = "fixed"
    schedule_h: tuple = (4,)
    schedule_eps: tuple = ()
    schedule_delta: tuple = ()
    vector_budget: int = 4
    search_cap: int = 512
    check_rigidity: bool = False
    schedule_rho: Any = "powers_of_two"
    stats_stage: int = 0
    stats_F: str | None = None
    stats_K: int = 10
    stats_A: str | None = None
    stats_B: str | None = None
    stats_N: int = 32
    stats_rho: tuple = ()
    stats_vector: tuple = (1, -1)
    stats_sweep_F: str | None = None
    stats_sweep_N: int = 64

    @classmethod
    def from_mapping(cls, tree: dict) -> "RunConfig":
        flat = _flatten(tree)
        unknown = sorted(set(flat) - _KNOWN)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls()
        for key, value in flat.items():
            attr = key.replace("starter.", "starter_").replace("stats.", "stats_")
            attr = {"schedule.vector_budget": "vector_budget",
                    "schedule.search_cap": "search_cap",
                    "schedule.check_rigidity": "check_rigidity"}.get(attr, attr.replace("schedule.", "schedule_"))
            if isinstance(value, list):
                value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
            setattr(cfg, attr, value)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                tree = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_mapping(tree)

    def validate(self) -> None:
        if not isinstance(self.stages, int) or self.stages < 1:
            raise ConfigError("stages must be a positive integer")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.starter_kind not in ("odometer", "chacon", "custom"):
            raise ConfigError("starter.kind must be odometer, chacon or custom")
        if self.starter_kind == "custom" and not self.starter_cuts:
            raise ConfigError("custom starter needs starter.cuts and starter.spacers")
        if self.schedule_kind not in ("fixed", "auto"):
            raise ConfigError("schedule.kind must be fixed or auto")
        if self.schedule_kind == "fixed" and (not self.schedule_h or any(h < 2 for h in self.schedule_h)):
            raise ConfigError("schedule.h must list heights >= 2")
        if self.piece_budget < 1:
            raise ConfigError("piece_budget must be positive")
        for v in self.stats_vector:
            if not isinstance(v, int) or v == 0:
                raise ConfigError("stats.vector entries must be nonzero integers")

    def delta_override(self) -> list[Fraction]:
        return [_rat(v, "schedule.delta") for v in self.schedule_delta]

    def fixed_schedule(self, n: int) -> tuple[int, Fraction]:
        """``(h_n, eps_n)``: listed values, then doubling of the last height;
        ``eps_n`` defaults to ``1/h_n``."""
        hs = list(self.schedule_h)
        h = hs[n - 1] if n <= len(hs) else hs[-1] * 2 ** (n - len(hs))
        eps = [_rat(v, "schedule.eps") for v in self.schedule_eps]
        e = eps[n - 1] if n <= len(eps) else Fraction(1, h)
        return h, e


def _rat(v, key: str) -> Fraction:
    try:
        if isinstance(v, int):
            return Fraction(v)
        return parse_rat(str(v))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: {v!r} is not an exact rational") from None


# -- atomic writes -----------------------------------------------------------------------


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- snapshots -------------------------------------------------------------------------

SET_SECTIONS = ("X", "Y", "J", "E", "I", "Istar", "Xprime", "D")
PARTITION_SECTIONS = ("C", "Pprime", "Q")
MAP_SECTIONS = ("R", "S", "tau", "psi")
_FIELD = {"X": "X", "Y": "Y", "J": "J", "E": "E", "I": "I", "Istar": "I_star",
          "Xprime": "X_prime", "D": "D", "C": "C", "Pprime": "P_prime", "Q": "Q",
          "R": "R", "S": "S", "tau": "tau", "psi": "psi"}


def snapshot_name(n: int) -> str:
    return f"stage_{n:03d}.snap"


def _opt(q) -> str:
    return "-" if q is None else format_rat(q)


def snapshot_text(st: StageState, *, j: int | None = None) -> str:
    lines = [f"stage {st.n} {format_rat(st.b)} {st.h} {format_rat(st.eps)} {_opt(st.d)} {_opt(st.kappa)}",
             f"schedule {'-' if st.M is None else st.M} {_opt(st.delta)} {'-' if j is None else j} "
             f"{_opt(st.kappa_ratio)} {st.mode}"]
    for name in SET_SECTIONS:
        v = getattr(st, _FIELD[name])
        if isinstance(v, Interval):
            v = v.as_set()
        body = [] if v is None else to_set_lines(v)
        lines.append(f"@{name} {len(body)}")
        lines.extend(body)
    for name in PARTITION_SECTIONS:
        parts = getattr(st, _FIELD[name])
        body = []
        for k, cell in enumerate(parts or ()):
            body.extend(f"{k} {line}" for line in to_set_lines(cell))
        lines.append(f"@{name} {len(body)} {len(parts or ())}")
        lines.extend(body)
    for name in MAP_SECTIONS:
        f = getattr(st, _FIELD[name])
        body = [] if f is None else f.to_lines()
        lines.append(f"@{name} {len(body)}")
        lines.extend(body)
    return "\n".join(lines) + "\n"


def write_snapshot(out_dir, st: StageState, *, j: int | None = None) -> Path:
    path = Path(out_dir) / snapshot_name(st.n)
    atomic_write(path, snapshot_text(st, j=j))
    return path


@dataclass
class Snapshot:
    state: StageState
    j: int | None
    path: Path


def _parse_opt(tok: str):
    return None if tok == "-" else parse_rat(tok)


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise MissingSnapshot(f"{path} does not exist") from None
    try:
        return _parse_snapshot(lines, path)
    except CorruptSnapshot:
        raise
    except (ValueError, IndexError, KeyError, ZeroDivisionError, ExactError) as exc:
        raise CorruptSnapshot(path, str(exc) or type(exc).__name__) from None


def _parse_snapshot(lines: list[str], path: Path) -> Snapshot:
    head = lines[0].split()
    sched = lines[1].split()
    if len(head) != 7 or head[0] != "stage" or len(sched) != 6 or sched[0] != "schedule":
        raise CorruptSnapshot(path, "bad header")
    fields: dict[str, Any] = {}
    pos = 2
    seen = []
    while pos < len(lines):
        tag = lines[pos].split()
        if not tag or not tag[0].startswith("@"):
            raise CorruptSnapshot(path, f"line {pos + 1}: expected a section header")
        name, count = tag[0][1:], int(tag[1])
        body = lines[pos + 1:pos + 1 + count]
        if len(body) != count:
            raise CorruptSnapshot(path, f"section {name} is truncated")
        pos += 1 + count
        seen.append(name)
        if name in SET_SECTIONS:
            fields[_FIELD[name]] = parse_set_lines(body)
        elif name in PARTITION_SECTIONS:
            nparts = int(tag[2])
            cells: list[list[str]] = [[] for _ in range(nparts)]
            for line in body:
                k, rest = line.split(None, 1)
                cells[int(k)].append(rest)
            fields[_FIELD[name]] = [parse_set_lines(c) for c in cells] if nparts else None
        elif name in MAP_SECTIONS:
            fields[_FIELD[name]] = parse_map_lines(body) if count else None
        else:
            raise CorruptSnapshot(path, f"unknown section {name}")
    expected = list(SET_SECTIONS + PARTITION_SECTIONS + MAP_SECTIONS)
    if seen != expected:
        raise CorruptSnapshot(path, "missing or reordered sections")

    def interval(S: IntervalSet) -> Interval:
        if len(S.pairs) != 1:
            raise CorruptSnapshot(path, "expected a single interval")
        return Interval(*S.pairs[0])

    mode = sched[5]
    if mode not in MODES:
        raise CorruptSnapshot(path, f"unknown mode {mode}")
    multiplexed = fields["tau"] is not None
    st = StageState(
        n=int(head[1]), X=fields["X"], Y=interval(fields["Y"]), b=parse_rat(head[2]),
        R=fields["R"], S=fields["S"], h=int(head[3]), eps=parse_rat(head[4]),
        J=interval(fields["J"]), psi=fields["psi"], mode=mode,
        I=fields["I"] if multiplexed else None, E=fields["E"] if multiplexed else None,
        I_star=fields["I_star"] if multiplexed else None,
        X_prime=fields["X_prime"] if multiplexed else None,
        d=_parse_opt(head[5]), C=fields["C"], P_prime=fields["P_prime"], Q=fields["Q"],
        D=fields["D"] if multiplexed else None, tau=fields["tau"],
        kappa_ratio=_parse_opt(sched[4]), kappa=_parse_opt(head[6]),
        M=None if sched[1] == "-" else int(sched[1]), delta=_parse_opt(sched[2]))
    if st.R is None or st.S is None or st.psi is None:
        raise CorruptSnapshot(path, "stage maps are missing")
    if path.name != snapshot_name(st.n):
        raise CorruptSnapshot(path, f"file name does not match stage {st.n}")
    return Snapshot(st, None if sched[3] == "-" else int(sched[3]), path)


def read_snapshots(out_dir) -> list[Snapshot]:
    """Every ``stage_NNN.snap`` in ``out_dir``; stages must run 1..N."""
    out_dir = Path(out_dir)
    paths = sorted(out_dir.glob("stage_*.snap")) if out_dir.is_dir() else []
    if not paths:
        raise MissingSnapshot(f"no snapshots in {out_dir}")
    snaps = [read_snapshot(p) for p in paths]
    for k, s in enumerate(snaps, start=1):
        if s.state.n != k:
            raise MissingSnapshot(f"stage {k} snapshot is missing in {out_dir}")
    return snaps


# -- CSV -----------------------------------------------------------------------------


def csv_text(header: Sequence[str], rows: Iterable[Sequence], rational: Sequence[str] = ()) -> str:
    """CSV with an ``<name>_approx`` decimal column after each rational column."""
    rational = set(rational)
    cols = []
    for h in header:
        cols.append(h)
        if h in rational:
            cols.append(f"{h}_approx")
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        out = []
        for h, v in zip(header, row):
            if h in rational:
                out.extend([format_rat(v), approx(v)])
            else:
                out.append(v)
        w.writerow(out)
    return buf.getvalue()


def write_csv(path, header, rows, rational=()) -> Path:
    atomic_write(path, csv_text(header, rows, rational))
    return Path(path)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} has no header")
    return rows[0], rows[1:]


# which column of each report is plotted against the index column
PLOT_COLUMNS = {
    "weights": ("k", "a_k"),
    "rwm": ("i", "partial_sum"),
    "power": ("i", "partial_sum"),
    "rigidity": ("rho", "deviation"),
    "sweep": ("K", "unswept"),
}


def plot_text(header: list[str], rows: list[list[str]], x: str, y: str) -> str:
    """``x,y`` pairs with ``y`` the decimal approximation of a rational column."""
    xi, yi = header.index(x), header.index(y)
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for row in rows:
        w.writerow([row[xi], approx(parse_rat(row[yi]))])
    return buf.getvalue()

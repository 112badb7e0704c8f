"""Command line front end.

    horient analyze --surface mobius --R 0.2 --w 0.1 --modes characteristic
    horient export --surface mobius --R 0.5 --w 0.2 --grid 72x16 --out strip.csv

Exit status: 0 conclusive, 2 some verdict inconclusive, 64 usage error,
74 I/O error, 1 anything else (including failed invariance audits and
malformed polynomial files).
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Mapping, Sequence
from pathlib import Path
from typing import Any, Final, Literal, TypeVar

import argparse
import contextlib
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time

import numpy as np
from typing_extensions import Self, override

from horient.calculus import PolynomialParseError, load_polynomial
from horient.custom_types import Mode
from horient.fig import Fig
from horient.group import Automorphism, Dilation, GroupElement, LeftTranslation
from horient.orientability import (
    InvarianceReport,
    OrientabilityReport,
    SeamTransport,
    invariance_audit,
)
from horient.pprinting import pformat
from horient.surfaces import (
    CATALOG_NAMES,
    CatalogSurface,
    CharacteristicPoint,
    LevelSetSurface,
    ParametrizedPatch,
    catalog_surface,
    parameter_grid,
    patch_euclidean_normal_array,
    patch_normal_array,
)


__all__ = [
    "Analysis",
    "AnalysisConfig",
    "AnalysisResult",
    "UsageError",
    "main",
    "result_to_json",
]

logger = logging.getLogger(__name__)

EXIT_OK: Final = 0
EXIT_ERROR: Final = 1
EXIT_INCONCLUSIVE: Final = 2
EXIT_USAGE: Final = 64
EXIT_IO: Final = 74

MODE_NAMES: Final = (
    "characteristic",
    "orientability-euclidean",
    "orientability-heisenberg",
    "invariance",
)
CSV_HEADER: Final = ("r", "s", "x", "y", "t", "N1", "N2", "N3", "nE1", "nE2", "nE3")

_VERDICT_NAMES: Final = {
    "orientable": "Orientable",
    "non-orientable": "NonOrientable",
    "inconclusive": "Inconclusive",
}
_MODE_LABELS: Final = {"euclidean": "Euclidean", "heisenberg": "Heisenberg"}

_T = TypeVar("_T")


class UsageError(Exception):
    """Bad command line or configuration."""


@dataclasses.dataclass(frozen=True, slots=True)
class AnalysisResult:
    surface: str
    parameters: Mapping[str, float]
    characteristic_points: tuple[CharacteristicPoint, ...] = ()
    orientability: tuple[OrientabilityReport, ...] = ()
    invariance: tuple[InvarianceReport, ...] | None = None
    timings_ms: Mapping[str, float] = dataclasses.field(default_factory=dict)

    @property
    def status(self) -> int:
        if self.invariance is not None and not all(r.ok for r in self.invariance):
            return EXIT_ERROR
        if any(r.verdict == "inconclusive" for r in self.orientability):
            return EXIT_INCONCLUSIVE
        return EXIT_OK


class Analysis:
    """One surface, analysed in the requested modes."""

    class Config(Fig["Analysis"]):
        surface: str = "mobius"
        R: float | None = None  # noqa: N815
        w: float | None = None
        c: float = 0.0
        poly: str | None = None
        grid: tuple[int, int] = (720, 160)
        tol: float = 1e-10
        char_tol: float = 1e-8
        modes: tuple[str, ...] = ("characteristic",)
        translate: tuple[float, ...] | None = None
        dilate: float | None = None
        output: Literal["json", "text"] = "json"
        out: str | None = None
        excise_radius: float = 0.0
        timings: bool = False
        transport: SeamTransport.Config = dataclasses.field(
            default_factory=SeamTransport.Config,
        )

        def finalize(self) -> Self:
            cfg = super().finalize()
            if cfg.surface not in CATALOG_NAMES:
                raise UsageError(
                    f"unknown surface {cfg.surface!r}; expected one of {', '.join(CATALOG_NAMES)}",
                )
            unknown = [m for m in cfg.modes if m not in MODE_NAMES]
            if unknown or not cfg.modes:
                raise UsageError(
                    f"unknown modes {unknown}; expected a subset of {', '.join(MODE_NAMES)}",
                )
            if cfg.surface == "mobius" and (cfg.R is None or cfg.w is None):
                raise UsageError("--surface mobius needs --R and --w")
            if cfg.surface == "poly" and cfg.poly is None:
                raise UsageError("--surface poly needs --poly FILE")
            if cfg.output not in ("json", "text"):
                raise UsageError(f"unknown output format {cfg.output!r}")
            if cfg.dilate is not None and not cfg.dilate > 0.0:
                raise UsageError(f"--dilate must be positive, got {cfg.dilate}")
            # Catalog patches live in H^1.
            if cfg.translate is not None and (
                len(cfg.translate) != 3 or not all(math.isfinite(v) for v in cfg.translate)
            ):
                raise UsageError(
                    f"--translate needs three finite components x,y,t, got {cfg.translate}",
                )
            if "invariance" in cfg.modes and cfg.translate is None and cfg.dilate is None:
                raise UsageError("--modes invariance needs --translate and/or --dilate")
            if not 0.0 < cfg.tol <= 1e-2:
                raise UsageError(f"--tol must be in (0, 1e-2], got {cfg.tol}")
            cfg.transport.update(
                grid=cfg.grid, char_tol=cfg.char_tol, excise_radius=cfg.excise_radius
            )
            cfg.transport.search.update(grid=cfg.grid, tol=cfg.tol)
            try:
                cfg.transport = cfg.transport.finalize()
            except ValueError as e:
                raise UsageError(str(e)) from e
            return cfg

    def __init__(self, config: Config) -> None:
        self.config = config
        self.transport = config.transport.make()
        poly = load_polynomial(config.poly) if config.surface == "poly" and config.poly else None
        try:
            self.catalog: CatalogSurface = catalog_surface(
                config.surface, R=config.R, w=config.w, c=config.c, poly=poly
            )
        except ValueError as e:
            raise UsageError(str(e)) from e
        self._timings: dict[str, float] = {}

    @contextlib.contextmanager
    def _timed(self, stage: str) -> Iterator[None]:
        start = time.perf_counter()
        yield
        elapsed = 1e3 * (time.perf_counter() - start)
        logger.info("%s: %.1f ms", stage, elapsed)
        if self.config.timings:
            self._timings[stage] = elapsed

    def automorphisms(self) -> list[Automorphism]:
        cfg = self.config
        out: list[Automorphism] = []
        if cfg.translate is not None:
            out.append(LeftTranslation(GroupElement.from_coords(cfg.translate)))
        if cfg.dilate is not None:
            out.append(Dilation(cfg.dilate))
        return out

    def run(self) -> AnalysisResult:
        cfg = self.config
        catalog = self.catalog
        modes = set(cfg.modes)
        orient_modes: list[Mode] = [
            m for m in ("euclidean", "heisenberg") if f"orientability-{m}" in modes
        ]
        points: list[CharacteristicPoint] = []
        if "characteristic" in modes or orient_modes:
            with self._timed("characteristic"):
                points = self.transport.search.run(catalog.characteristic_surface)
            logger.info("%s: %d characteristic points", catalog.name, len(points))
        reports: list[OrientabilityReport] = []
        for mode in orient_modes:
            surface = catalog.orientability_surface
            # Excision needs parameters; level-set points have none.
            known = points if surface is catalog.characteristic_surface or not points else None
            with self._timed(f"orientability-{mode}"):
                reports.append(self.transport.verdict(surface, mode, characteristic=known))
        audits: list[InvarianceReport] | None = None
        if "invariance" in modes:
            if catalog.patch is None:
                raise UsageError(f"invariance needs a parametrised patch; {catalog.name} has none")
            audits = []
            for m in self.automorphisms():
                with self._timed(f"invariance-{m.kind}"):
                    audits.append(
                        invariance_audit(
                            catalog.patch, m, cfg.grid, cfg.tol, config=cfg.transport
                        )
                    )
        return AnalysisResult(
            surface=catalog.name,
            parameters=dict(catalog.params),
            characteristic_points=tuple(points),
            orientability=tuple(reports),
            invariance=None if audits is None else tuple(audits),
            timings_ms=dict(self._timings),
        )

    def export_rows(self) -> Iterator[list[float]]:
        """Grid samples of the frame and coordinate normals, r outer, s inner."""
        patch = self.catalog.patch
        if patch is None:
            raise UsageError(f"export needs a parametrised patch; {self.catalog.name} has none")
        m, k = self.config.grid
        r, s = parameter_grid(patch, m, k)
        rr, ss = np.meshgrid(r, s, indexing="ij")
        table = np.concatenate([
            rr[np.newaxis],
            ss[np.newaxis],
            patch.evaluate(rr, ss),
            patch_normal_array(patch, rr, ss),
            patch_euclidean_normal_array(patch, rr, ss),
        ]).reshape(len(CSV_HEADER), -1)
        for row in table.T:
            yield row.tolist()


AnalysisConfig = Analysis.Config


def _finite(v: float | None) -> float | None:
    """Non-finite floats have no JSON spelling; they become null."""
    return v if v is not None and math.isfinite(v) else None


def _scalar_or_list(v: np.ndarray) -> float | list[float]:
    return float(v[0]) if v.size == 1 else v.tolist()


def _point_json(cp: CharacteristicPoint) -> dict[str, Any]:
    r, s = cp.params if cp.params is not None else (None, None)
    p = cp.point
    return {
        "r": r,
        "s": s,
        "x": _scalar_or_list(p.x),
        "y": _scalar_or_list(p.y),
        "t": p.t,
        "residual": _finite(cp.residual),
        "refined": cp.refined,
    }


def _orientability_json(report: OrientabilityReport) -> dict[str, Any]:
    return {
        "mode": _MODE_LABELS[report.mode],
        "verdict": _VERDICT_NAMES[report.verdict],
        "seam_mismatch": _finite(report.seam_mismatch),
        "min_normal_norm": _finite(report.min_normal_norm),
    }


def _invariance_json(report: InvarianceReport) -> dict[str, Any]:
    return {
        "automorphism": report.automorphism,
        "ok": report.ok,
        "original": [_point_json(p) for p in report.original],
        "transformed": [_point_json(p) for p in report.transformed],
        "max_param_shift": _finite(report.max_param_shift),
        "max_ambient_error": _finite(report.max_ambient_error),
        "verdicts": {
            _MODE_LABELS[m]: [_VERDICT_NAMES[a], _VERDICT_NAMES[b]]
            for m, (a, b) in report.verdicts.items()
        },
        "failures": list(report.failures),
    }


def result_to_json(result: AnalysisResult) -> dict[str, Any]:
    """The report document; floats keep their shortest round-trip repr."""
    doc: dict[str, Any] = {
        "surface": result.surface,
        "parameters": dict(result.parameters),
        "characteristic_points": [_point_json(p) for p in result.characteristic_points],
        "orientability": [_orientability_json(r) for r in result.orientability],
    }
    if result.invariance is not None:
        doc["invariance"] = [_invariance_json(r) for r in result.invariance]
    doc["timings_ms"] = dict(result.timings_ms)
    return doc


class _Parser(argparse.ArgumentParser):
    @override
    def error(self, message: str) -> Any:  # pyright: ignore[reportIncompatibleMethodOverride]
        raise UsageError(message)


def _parsed(kind: str, fn: Callable[[str], _T]) -> Callable[[str], _T]:
    def parse(text: str) -> _T:
        try:
            return fn(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind}: {text!r}") from None

    parse.__name__ = kind
    return parse


def _grid(text: str) -> tuple[int, int]:
    m, k = text.lower().split("x")
    return int(m), int(k)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _modes(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="horient", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log INFO (-v) or DEBUG (-vv) to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("analyze", "characteristic points, orientability and invariance"),
        ("export", "CSV of normals sampled on the parameter grid"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--surface", required=True, help=f"one of {', '.join(CATALOG_NAMES)}")
        p.add_argument("--R", type=_parsed("float", float), dest="R")
        p.add_argument("--w", type=_parsed("float", float))
        p.add_argument("--c", type=_parsed("float", float), default=0.0)
        p.add_argument("--poly", metavar="FILE", help="polynomial term file")
        p.add_argument("--grid", type=_parsed("grid MxK", _grid), default=(720, 160), metavar="MxK")
        p.add_argument("--tol", type=_parsed("float", float), default=1e-10)
        p.add_argument("--char-tol", type=_parsed("float", float), default=1e-8)
        p.add_argument("--out", metavar="PATH", help="write here instead of stdout")
        p.add_argument("-v", "--verbose", action="count", default=0, dest="sub_verbose",
                       help=argparse.SUPPRESS)
        if name == "analyze":
            p.add_argument("--modes", type=_modes, default=("characteristic",),
                           help=f"comma-separated subset of {', '.join(MODE_NAMES)}")
            p.add_argument("--translate", type=_parsed("point x,y,t", _floats), metavar="x,y,t")
            p.add_argument("--dilate", type=_parsed("float", float), metavar="r")
            p.add_argument("--output", choices=("json", "text"), default="json")
            p.add_argument("--excise-radius", type=_parsed("float", float), default=0.0)
            p.add_argument("--timings", action="store_true", help="fill timings_ms")
    return parser


def _config_from_args(args: argparse.Namespace) -> Analysis.Config:
    cfg = Analysis.Config()
    cfg.update(
        surface=args.surface,
        R=args.R,
        w=args.w,
        c=args.c,
        poly=args.poly,
        grid=args.grid,
        tol=args.tol,
        char_tol=args.char_tol,
        out=args.out,
    )
    if args.command == "analyze":
        cfg.update(
            modes=args.modes,
            translate=args.translate,
            dilate=args.dilate,
            output=args.output,
            excise_radius=args.excise_radius,
            timings=args.timings,
        )
    try:
        return cfg.finalize()
    except UsageError:
        raise
    except ValueError as e:
        raise UsageError(str(e)) from e


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8")


def cmd_analyze(config: Analysis.Config) -> int:
    result = config.make().run()
    if config.output == "json":
        text = json.dumps(result_to_json(result), indent=2, allow_nan=False) + "\n"
    else:
        text = pformat(result) + "\n"
    _emit(text, config.out)
    return result.status


def cmd_export(config: Analysis.Config) -> int:
    analysis = config.make()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows([repr(v) for v in row] for row in analysis.export_rows())
    _emit(buf.getvalue(), config.out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the exit status instead of exiting."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"horient: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    verbosity = args.verbose + args.sub_verbose
    logging.basicConfig(
        stream=sys.stderr,
        level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(verbosity, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("horient").setLevel(
        (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbosity, 2)]
    )
    try:
        config = _config_from_args(args)
        if args.command == "analyze":
            return cmd_analyze(config)
        return cmd_export(config)
    except UsageError as e:
        print(f"horient: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PolynomialParseError as e:
        print(f"horient: error: {args.poly}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"horient: error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception:
        logger.exception("analysis failed")
        return EXIT_ERROR

"""
Command line front end: geodesic, connect, cut, sphere and verify.

Exit codes: 0 success, 1 usage error, 2 no convergence, 3 out of the
validated range of the exponential map, 4 verification failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .config import CarnotConfig, CarnotSettings
from .errors import CarnotError, PreconditionError, TheoremViolation
from .expmap import connect, sphere_sample
from .export import write_csv
from .extremals import (DEFAULT_STEP, TRAJECTORY_COLUMNS, GeodesicParams, controls,
                        closed_form_trajectory, geodesic_points, initial_state,
                        integrate_numeric, level_residual, normalize)
from .group_core import GroupPoint
from .logging_setup import setup_logging
from .optimality import GeodesicTag, classify, cut_endpoint
from .schemas import (CheckResult, ClassificationModel, ConnectAnswerModel,
                      GroupPointModel, InvariantModel, OutputHeader, VerifyReport)
from .symmetry import Rotation, act_arrays
from .verify import FAULTS, run_checks

logger = logging.getLogger(__name__)


class UsageError(PreconditionError):
    """Malformed command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str, count: int, name: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name} must be {count} comma separated numbers, got {text!r}") from None
    if len(values) != count:
        raise UsageError(f"{name} needs {count} values, got {len(values)}")
    return values


def _header(settings: CarnotSettings) -> OutputHeader:
    return OutputHeader(version=__version__, config_hash=settings.digest(), seed=settings.seed)


def _metadata(settings: CarnotSettings, **extra) -> dict:
    return _header(settings).model_dump() | extra


def _emit(text: str):
    sys.stdout.write(text + "\n")


def _params(args) -> GeodesicParams:
    p = GeodesicParams.from_sequence(_floats(args.params, 7, "--params"))
    if not np.any(p.as_array()):
        raise UsageError("--params describes no curve")
    if p.is_constant_control:
        raise UsageError("C1 = C2 = 0 with K != 0 gives constant controls")
    residual = level_residual(p)
    if abs(residual) > 1e-10:
        logger.info("Normalizing parameters onto the unit level set (residual %.3e)", residual)
        p = normalize(p)
    return p


def _classification(p: GeodesicParams, settings: CarnotSettings, tol: float) -> ClassificationModel:
    cls = classify(p, tol, settings.tau_grid.tau_max, settings.tau_grid.step)
    data = cls.to_dict()
    end = cut_invariants = None
    if cls.tag is GeodesicTag.INCN:
        point = cut_endpoint(cls.canonical)
        end = GroupPointModel.from_point(point)
        cut_invariants = InvariantModel.of_point(point)
    return ClassificationModel(header=_header(settings), params=p.as_array().tolist(),
                               level_residual=level_residual(p), cut_endpoint=end,
                               cut_invariants=cut_invariants, **data)


def cmd_geodesic(args, settings: CarnotSettings) -> int:
    p = _params(args)
    if args.tmax <= 0 or args.samples < 2:
        raise UsageError("--tmax must be positive and --samples at least 2")
    summary = _classification(p, settings, settings.tolerances.collinearity)
    traj = closed_form_trajectory(p, args.tmax, args.samples)
    rows = traj.rows()
    if args.canonical and summary.canonical is not None:
        back = Rotation(np.array(summary.canonical["R"])).T
        # (h0, h, w) transform like (x, l, y)
        rows[:, 1:8] = act_arrays(back, rows[:, 1:8])
        rows[:, 8:15] = act_arrays(back, rows[:, 8:15])

    if args.oracle:
        step = args.step or settings.integrator.step
        every = max(1, int(round(args.tmax / (args.samples - 1) / step)))
        numeric = integrate_numeric(initial_state(p), args.tmax, step, sample_every=every)
        closed = np.concatenate((geodesic_points(numeric.times, p), controls(numeric.times, p)), axis=1)
        summary.oracle_max_deviation = float(np.max(np.abs(numeric.states[:, :11] - closed)))
        logger.info("Closed form vs RK4: max deviation %.3e", summary.oracle_max_deviation)

    out = Path(args.out) if args.out else Path(settings.output.directory) / "geodesic.csv"
    write_csv(out, TRAJECTORY_COLUMNS, rows,
              _metadata(settings, params=",".join(f"{v:.17g}" for v in p.as_array()),
                        canonical=bool(args.canonical)))
    _emit(summary.model_dump_json(by_alias=True))
    return 0


def cmd_connect(args, settings: CarnotSettings) -> int:
    q = GroupPoint.from_array(_floats(args.endpoint, 7, "--endpoint"))
    tol = args.tol or settings.tolerances.connect
    answer = connect(q, tol, settings.seed_grid_spec(), settings.tolerances.collinearity,
                     settings.tolerances.newton)
    data = answer.to_dict()
    if answer.params is not None:
        data["params"] = data["params"] | {"length": answer.params.length}
    model = ConnectAnswerModel(header=_header(settings), endpoint=GroupPointModel.from_point(q),
                               invariants=InvariantModel.of_point(q), **data)
    if answer.maxwell:
        logger.warning("Maxwell point: the reported geodesic is one of a circle of minimizers")
    _emit(model.model_dump_json())
    return 0


def cmd_cut(args, settings: CarnotSettings) -> int:
    p = _params(args)
    summary = _classification(p, settings, args.tol or settings.tolerances.collinearity)
    _emit(summary.model_dump_json(by_alias=True))
    return 0


def cmd_sphere(args, settings: CarnotSettings) -> int:
    if args.count <= 0:
        raise UsageError("--count must be positive")
    seed = settings.seed
    rng = np.random.default_rng(seed)
    sample = sphere_sample(args.count, rng, args.stratum, args.slice, args.band, args.align)
    out = Path(args.out) if args.out else Path(settings.output.directory) / "sphere.csv"
    meta = _metadata(settings, **sample.metadata)
    write_csv(out, sample.columns, sample.projected(), meta)
    _emit(json.dumps({"out": str(out), "rows": int(len(sample.points)), "seed": seed}))
    return 0


def cmd_verify(args, settings: CarnotSettings) -> int:
    checks: List[CheckResult] = run_checks(settings, args.inject_fault, args.only)
    report = VerifyReport(header=_header(settings), checks=checks)
    text = report.model_dump_json(by_alias=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    _emit(text)
    if not report.ok:
        failed = [c.check for c in checks if not c.passed]
        raise TheoremViolation(f"Failed checks: {', '.join(failed)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="carnot47", description="Geodesics of the (4,7) Carnot group")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="YAML file with overrides of the default settings")
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--log-json", action="store_true", help="structured JSON log records")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config file)")
    sub = parser.add_subparsers(dest="command", required=True)

    geo = sub.add_parser("geodesic", help="sample a geodesic from its seven constants")
    geo.add_argument("--params", required=True, help="C1,C2,C3,C4,K1,K2,K3")
    geo.add_argument("--tmax", type=float, default=10.0)
    geo.add_argument("--samples", type=int, default=1001)
    geo.add_argument("--out")
    geo.add_argument("--oracle", action="store_true", help="report closed form vs RK4 deviation")
    geo.add_argument("--step", type=float, default=None, help=f"RK4 step (default {DEFAULT_STEP:g})")
    geo.add_argument("--canonical", action="store_true", help="rotate the trajectory to its representative")
    geo.set_defaults(func=cmd_geodesic)

    con = sub.add_parser("connect", help="geodesic from the origin to an endpoint")
    con.add_argument("--endpoint", required=True, help="x,l1,l2,l3,y1,y2,y3")
    con.add_argument("--tol", type=float)
    con.set_defaults(func=cmd_connect)

    cut = sub.add_parser("cut", help="classification and cut time")
    cut.add_argument("--params", required=True, help="C1,C2,C3,C4,K1,K2,K3")
    cut.add_argument("--tol", type=float)
    cut.set_defaults(func=cmd_cut)

    sph = sub.add_parser("sphere", help="sample the unit sub-Riemannian sphere")
    sph.add_argument("--count", type=int, default=10000)
    sph.add_argument("--stratum", choices=("generic", "line", "incn"), default="generic")
    sph.add_argument("--slice", help="coordinates to emit, e.g. x,l1,y2")
    sph.add_argument("--band", type=float, help="keep points whose other coordinates are within band of 0")
    sph.add_argument("--align", action="store_true", help="rotate l onto e1 and y into the (e1, e2) plane")
    sph.add_argument("--out")
    sph.set_defaults(func=cmd_sphere)

    ver = sub.add_parser("verify", help="run the numerical property suite")
    ver.add_argument("--out")
    ver.add_argument("--only", nargs="+", help="run only the named checks")
    ver.add_argument("--inject-fault", choices=FAULTS, help="mutation sanity check")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level, args.log_json)
        config = CarnotConfig(args.config)
        if args.seed is not None:
            config.set("seed", args.seed)
        settings = config.settings()
        return args.func(args, settings)
    except CarnotError as e:
        logger.error("%s", e)
        sys.stderr.write(f"carnot47: {e}\n")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: ``verify``, ``sample-phi`` and ``fit-abc``.

Exit status is 0 when every identity passes, 1 on an identity failure or a
point that could not be processed, and 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, fields
from typing import Optional

from . import __version__
from .campaign import IDENTITIES, Campaign, FamilyRequest, point_record, sample_phi_rows, tolerances_for
from .catalog import FAMILIES
from .errors import QchError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
COEFFICIENT_COLUMNS = ("a", "b", "c", "lambda", "mu", "delta", "kappa")


class ConfigError(Exception):
    pass


@dataclass
class CampaignConfig:
    family: str = "space_form"
    params: dict = field(default_factory=dict)
    points: int = 20
    seed: int = 0
    tol: Optional[float] = None
    tolerances: dict = field(default_factory=dict)
    identities: Optional[list] = None
    out: Optional[str] = None
    workers: int = 1
    directions: int = 20
    perturbation: float = 0.0
    distribution: Optional[list] = None

    def validate(self) -> "CampaignConfig":
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be a mapping")
        for name, low in (("points", 1), ("workers", 1), ("directions", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < low:
                raise ConfigError(f"{name} must be an integer >= {low}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.tol is not None and not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol must be a positive number")
        if self.identities is not None:
            unknown = set(self.identities) - set(IDENTITIES)
            if unknown:
                raise ConfigError(f"unknown identities: {', '.join(sorted(unknown))}")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("tolerances must be a mapping")
        unknown = set(self.tolerances) - set(IDENTITIES)
        if unknown:
            raise ConfigError(f"unknown identities in tolerances: {', '.join(sorted(unknown))}")
        return self

    def request(self) -> FamilyRequest:
        return FamilyRequest.create(self.family, self.params, self.perturbation, self.distribution)

    def echo(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "out"}


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def build_config(args) -> CampaignConfig:
    data = load_config_file(args.config) if args.config else {}
    known = {f.name for f in fields(CampaignConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in known:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if isinstance(data.get("params"), str):
        try:
            data["params"] = json.loads(data["params"])
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--params is not valid JSON: {exc}") from exc
    return CampaignConfig(**data).validate()


def _coordinate_names(instance) -> list:
    names = list(instance.chart.names or ())
    return names if len(names) == 4 else [f"x{i}" for i in range(4)]


def _write_csv(rows: list, columns: list, out: Optional[str]):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), out)


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _flatten(rec: dict, coords: list) -> dict:
    row = {"index": rec["index"], **dict(zip(coords, rec["point"]))}
    for key in COEFFICIENT_COLUMNS + ("tau", "t2", "phi", "error"):
        if key in rec:
            row[key] = rec[key]
    for name, value in rec.get("residuals", {}).items():
        row[f"residual:{name}"] = value
    for key, value in rec.items():
        if key.startswith("residual:"):
            row[key] = value
    return row


def report_document(config: CampaignConfig, report) -> dict:
    return {
        "engine": {"name": "qchlab", "version": __version__},
        "config": config.echo(),
        "report": report.to_dict(),
        "summary": {
            "passed": report.passed,
            "points": len(report.records),
            "errors": sum(1 for r in report.records if r["error"]),
            "max_residuals": report.max_residuals(),
            "failures": [list(f) for f in report.failures()],
        },
    }


def cmd_verify(config: CampaignConfig) -> int:
    campaign = Campaign(
        config.request(),
        points=config.points,
        seed=config.seed,
        tol=config.tol,
        tolerances=config.tolerances,
        identities=None if config.identities is None else tuple(config.identities),
        workers=config.workers,
    )
    report = campaign.run()
    if config.out and config.out.endswith(".csv"):
        coords = _coordinate_names(campaign.instance())
        names = sorted({k for r in report.records for k in r["residuals"]})
        columns = ["index", *coords, *COEFFICIENT_COLUMNS, "tau", *(f"residual:{n}" for n in names), "error"]
        _write_csv([_flatten(r, coords) for r in report.records], columns, config.out)
    else:
        _emit(json.dumps(report_document(config, report), indent=2, sort_keys=True) + "\n", config.out)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {campaign.instance().name}: {len(report.records)} points, {len(report.failures())} failures", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_fit_abc(config: CampaignConfig) -> int:
    request = config.request()
    instance = request.build()
    tols = tolerances_for(instance, config.tolerances, config.tol)
    coords = _coordinate_names(instance)
    points = instance.sample(config.points, config.seed)
    records = [point_record(instance, i, p, config.seed, ("qch", "fit")) for i, p in enumerate(points)]
    columns = ["index", *coords, *COEFFICIENT_COLUMNS, "tau", "residual:qch", "residual:fit", "error"]
    _write_csv([_flatten(r, coords) for r in records], columns, config.out)
    ok = all(r["error"] is None and all(v <= tols[k] for k, v in r["residuals"].items()) for r in records)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sample_phi(config: CampaignConfig) -> int:
    instance = config.request().build()
    tols = tolerances_for(instance, config.tolerances, config.tol)
    coords = _coordinate_names(instance)
    points = instance.sample(config.points, config.seed)
    rows = sample_phi_rows(instance, points, config.seed, config.directions)
    flat = [{**_flatten(r, coords), **dict(zip(coords, r["point"]))} for r in rows]
    columns = ["index", *coords, "t2", "phi", *COEFFICIENT_COLUMNS, "residual:fit"]
    _write_csv(flat, columns, config.out)
    ok = all(r["residual:fit"] <= tols["fit"] for r in rows)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "sample-phi": cmd_sample_phi, "fit-abc": cmd_fit_abc}


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",")]


def _str_list(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qchlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qchlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        p.add_argument("--family", help=f"one of {', '.join(FAMILIES)}")
        p.add_argument("--params", help='family parameters as JSON, e.g. \'{"V": [1, 0, 1]}\'')
        p.add_argument("--points", type=int, help="number of sample points")
        p.add_argument("--seed", type=int, help="seed for point sampling and fit directions")
        p.add_argument("--tol", type=float, help="tolerance applied to every identity")
        p.add_argument("--out", help="output path (JSON report, or CSV table)")
        p.add_argument("--workers", type=int, help="processes for the point map")
        p.add_argument("--directions", type=int, help="random directions per point (sample-phi)")
        p.add_argument("--identities", type=_str_list, help="comma-separated identity names to run")
        p.add_argument("--perturbation", type=float, help="size of the non-Kahler conformal bump")
        p.add_argument("--distribution", type=_int_list, help="replace D by two coordinate vectors, e.g. 0,2")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
        config.request().build()
    except (ConfigError, QchError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return COMMANDS[args.command](config)


if __name__ == "__main__":
    sys.exit(main())

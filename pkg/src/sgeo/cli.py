"""Declarative verification runner.

A JSON config names a geometry and a list of checks; ``run`` executes
them (in parallel when asked), collects per-check reports, and emits a
versioned JSON report whose content hash is deterministic for a fixed
(config, seed) -- timing is recorded but excluded from the hash.  The
report also carries the two data that determine the model up to unitary
equivalence: the eigenvalue list of the truncated operator and a
fingerprint of the change of basis from the generator representation to
the eigenbasis.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .calculus import max_principle_check, order_one_check, regularity_probe
from .charts import cover_check, default_charts
from .dixmier import dixmier_estimate, heat_vs_dixmier
from .geometries import CORRUPTION_MODES, GeometrySpec
from .hochschild import orientability_check
from .metric import connes_distance, finite_propagation_check
from .report import CheckReport
from .spectral import dimension_fit
from .triple import TruncatedTriple, validate_triple

__all__ = ["RunConfig", "RunReport", "ConfigError", "run", "list_targets",
           "main", "CHECKS"]

SCHEMA = "sgeo-report/1"


class ConfigError(ValueError):
    """Malformed configuration; maps to process exit status 2."""


# ---------------------------------------------------------------------------
# check registry: name -> callable(triple, params) -> CheckReport


def _coordinate_name(t: TruncatedTriple) -> str:
    """A Hermitian coordinate-like element to probe smoothness checks with."""
    for name in ("x", "sin", "sin_x"):
        if name in t.algebra:
            return name
    return sorted(k for k in t.algebra if k != "one")[0]


def _check_validate(t, params):
    res = validate_triple(t, **params)
    ok = res.pop("ok")
    return CheckReport("validate", "pass" if ok else "fail", res,
                       diagnostics={"hilbert_dim": t.hilbert_dim})


def _check_order_one(t, params):
    return order_one_check(t, **params)


def _check_orientability(t, params):
    if t.cycle is None:
        return CheckReport("orientability", "inconclusive",
                           reason="geometry ships no orientation chain")
    res = orientability_check(t, **params)
    ok = res.pop("ok")
    return CheckReport("orientability", "pass" if ok else "fail", res)


def _check_dimension(t, params):
    tol = float(params.pop("tol", 0.05))
    est = dimension_fit(t)
    residual = abs(est.value + 1.0 / t.p)
    verdict = "pass" if (residual <= tol and est.converged) else "fail"
    if not est.converged:
        verdict = "inconclusive"
    return CheckReport("dimension", verdict,
                       {"slope_error": residual}, {"slope_error": tol},
                       diagnostics=est.as_dict())


def _check_dixmier(t, params):
    expected = params.pop("expected", None)
    rel_tol = float(params.pop("rel_tol", 0.05))
    est = dixmier_estimate(1, t, **params)
    if expected is None:
        verdict = "pass" if est.converged else "inconclusive"
        return CheckReport("dixmier", verdict, {},
                           diagnostics=est.as_dict())
    residual = abs(est.value - expected) / abs(expected)
    verdict = "pass" if (est.converged and residual <= rel_tol) else "fail"
    return CheckReport("dixmier", verdict, {"relative_error": residual},
                       {"relative_error": rel_tol}, diagnostics=est.as_dict())


def _check_heat_vs_dixmier(t, params):
    return heat_vs_dixmier(1, lambda u: np.clip(1.0 - u, 0.0, None),
                           t, **params)


def _check_max_principle(t, params):
    name = params.pop("element", _coordinate_name(t))
    return max_principle_check(name, t, **params)


def _check_regularity(t, params):
    name = params.pop("element", _coordinate_name(t))
    prof = regularity_probe(name, t, **params)
    residuals = {}
    if prof.growth_ratios:
        residuals["worst_growth_ratio"] = max(prof.growth_ratios)
    return CheckReport("regularity", prof.verdict, residuals,
                       diagnostics={"norms_delta": prof.norms_delta,
                                    "norms_delta1": prof.norms_delta1},
                       reason=prof.reason)


def _check_cover(t, params):
    return cover_check(t, default_charts(t), **params)


def _check_propagation(t, params):
    period = 2.0 * np.pi / max(1.0, float(np.round(t.band_edge_energy
                                                   / t.band.cutoff)))
    times = params.pop("times", [0.25 * period, 0.5 * period])
    return finite_propagation_check(t, times, **params)


CHECKS = {
    "validate": _check_validate,
    "order_one": _check_order_one,
    "orientability": _check_orientability,
    "dimension": _check_dimension,
    "dixmier": _check_dixmier,
    "heat_vs_dixmier": _check_heat_vs_dixmier,
    "max_principle": _check_max_principle,
    "regularity": _check_regularity,
    "cover": _check_cover,
    "finite_propagation": _check_propagation,
}


# ---------------------------------------------------------------------------
# config / report


@dataclass
class RunConfig:
    geometry: GeometrySpec
    checks: list = field(default_factory=list)   # (name, params) pairs
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str | None = None
    jobs: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"geometry", "checks", "tolerances", "seed", "output_path",
                 "jobs"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        if "geometry" not in d:
            raise ConfigError("config needs a 'geometry' block")
        try:
            geom = GeometrySpec.from_dict(d["geometry"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad geometry block: {e}") from e
        checks = []
        for entry in d.get("checks", []):
            if isinstance(entry, str):
                checks.append((entry, {}))
            elif isinstance(entry, dict) and "name" in entry:
                checks.append((entry["name"],
                               {k: v for k, v in entry.items() if k != "name"}))
            else:
                raise ConfigError(f"bad check entry {entry!r}")
        unknown = [name for name, _ in checks if name not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown check names {unknown}; "
                              f"known: {sorted(CHECKS)}")
        return cls(geometry=geom, checks=checks,
                   tolerances=dict(d.get("tolerances", {})),
                   seed=int(d.get("seed", 0)),
                   output_path=d.get("output_path"),
                   jobs=int(d.get("jobs", 1)))

    def as_dict(self) -> dict:
        g = self.geometry
        return {"geometry": {"kind": g.kind, "cutoff": g.cutoff, "p": g.p,
                             "options": g.options, "corruption": g.corruption,
                             "ladder": list(g.ladder)},
                "checks": [{"name": n, **p} for n, p in self.checks],
                "tolerances": self.tolerances, "seed": self.seed}


@dataclass
class RunReport:
    body: dict

    @property
    def exit_status(self) -> int:
        return 0 if self.body["summary"]["fail"] == 0 else 1

    def as_json(self) -> str:
        return json.dumps(self.body, indent=2, sort_keys=True)

    @property
    def determinism_hash(self) -> str:
        return self.body["determinism_hash"]


def _basis_fingerprint(t: TruncatedTriple) -> str:
    V = t.d_basis.dense()
    data = np.round(np.asarray(V, dtype=complex), 10)
    h = hashlib.sha256()
    h.update(str(data.shape).encode())
    h.update(data.tobytes())
    return h.hexdigest()


def _two_pieces(t: TruncatedTriple) -> dict:
    return {"d_eigenvalues": np.round(np.sort(np.real(t.d_spectrum)),
                                      10).tolist(),
            "basis_fingerprint": _basis_fingerprint(t)}


def run(config: RunConfig) -> RunReport:
    """Execute the configured checks and assemble the versioned report."""
    np.random.seed(config.seed)
    triple = config.geometry.realize()

    def one(entry):
        name, params = entry
        fn = CHECKS[name]
        start = time.perf_counter()
        try:
            rep = fn(triple, dict(params))
        except Exception as e:   # per-check failures must not kill the run
            rep = CheckReport(name, "fail", reason=f"{type(e).__name__}: {e}")
        return name, rep, time.perf_counter() - start

    if config.jobs > 1 and len(config.checks) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(one, config.checks))
    else:
        results = [one(entry) for entry in config.checks]

    counts = {"pass": 0, "fail": 0, "inconclusive": 0}
    for _, rep, _ in results:
        counts[rep.verdict] = counts.get(rep.verdict, 0) + 1
    body = {
        "schema": SCHEMA,
        "config": config.as_dict(),
        "checks": [rep.as_dict() for _, rep, _ in results],
        "summary": counts,
        "two_pieces": _two_pieces(triple),
        "environment": {
            "version": __version__,
            "numpy": np.__version__,
            "timing": {name: dt for name, _, dt in results},
        },
    }
    hashed = {k: v for k, v in body.items() if k != "environment"}
    hashed["environment"] = {k: v for k, v in body["environment"].items()
                             if k != "timing"}
    digest = hashlib.sha256(
        json.dumps(hashed, sort_keys=True).encode()).hexdigest()
    body["determinism_hash"] = digest
    report = RunReport(body)
    if config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(report.as_json() + "\n")
    return report


def list_targets() -> str:
    """Human-readable inventory of geometries, checks, and corruptions."""
    lines = ["geometries:"]
    lines += [f"  circle        cutoff >= 8, p = 1",
              f"  torus         cutoff >= 8, p in {{2, 3}}; options: "
              f"operator=dirac|signature (p=2)",
              f"  interval      expected-fail boundary fixture, p = 1"]
    lines.append("checks (default tolerance):")
    defaults = {"validate": "structural residuals <= 1e-10..1e-12",
                "order_one": "double commutator <= 1e-10",
                "orientability": "representation residual <= 1e-10",
                "dimension": "slope within 0.05 of -1/p",
                "dixmier": "converged; optional expected value +- 5%",
                "heat_vs_dixmier": "relative gap <= 7%, one-sided slack >= -2%",
                "max_principle": "bump halving ratio <= 0.6",
                "regularity": "tower growth <= 1.5x per cutoff doubling",
                "cover": "partition identity residual <= 1e-6",
                "finite_propagation": "mass leak <= 1%"}
    lines += [f"  {name:18s} {defaults[name]}" for name in sorted(CHECKS)]
    lines.append("corruption modes: " + ", ".join(CORRUPTION_MODES))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point


def _geometry_from_flags(args) -> GeometrySpec:
    return GeometrySpec(kind=args.geometry, cutoff=args.cutoff,
                        p=args.p if args.geometry == "torus" else 1)


def _parse_point(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sgeo", description="verification runner for truncated "
        "spectral models")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="run a JSON check plan")
    p_check.add_argument("config", help="path to a JSON config file")
    p_check.add_argument("--report", help="write the JSON report here")
    p_check.add_argument("--seed", type=int, default=None)
    p_check.add_argument("--jobs", type=int, default=None)

    for name in ("distance", "dixmier"):
        pp = sub.add_parser(name)
        pp.add_argument("--geometry", required=True,
                        choices=["circle", "torus", "interval"])
        pp.add_argument("--cutoff", type=int, default=32)
        pp.add_argument("--p", type=int, default=2)
        pp.add_argument("--report", default=None)
        pp.add_argument("--seed", type=int, default=0)
        pp.add_argument("--jobs", type=int, default=1)
        if name == "distance":
            pp.add_argument("--from", dest="src", required=True,
                            help="comma-separated coordinates")
            pp.add_argument("--to", dest="dst", required=True)

    sub.add_parser("list", help="enumerate geometries and checks")

    args = parser.parse_args(argv)

    if args.command == "list":
        print(list_targets())
        return 0

    try:
        if args.command == "check":
            try:
                with open(args.config) as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"{args.config}: {e}") from e
            config = RunConfig.from_dict(raw)
            if args.seed is not None:
                config.seed = args.seed
            if args.jobs is not None:
                config.jobs = args.jobs
            if args.report is not None:
                config.output_path = args.report
            report = run(config)
            for rep in report.body["checks"]:
                print(f"{rep['name']:20s} {rep['verdict']}")
            s = report.body["summary"]
            print(f"summary: {s['pass']} pass, {s['fail']} fail, "
                  f"{s['inconclusive']} inconclusive")
            return report.exit_status

        triple = _geometry_from_flags(args).realize()
        if args.command == "distance":
            res = connes_distance(_parse_point(args.src),
                                  _parse_point(args.dst), triple)
            out = {"lower_bound": res.lower_bound,
                   "converged": res.converged,
                   "iterations": res.iterations}
            print(json.dumps(out, indent=2, sort_keys=True))
        else:
            est = dixmier_estimate(1, triple)
            out = {"value": est.value, "converged": est.converged,
                   "trend_slope": est.trend_slope}
            print(json.dumps(out, indent=2, sort_keys=True))
        if args.report:
            with open(args.report, "w") as fh:
                json.dump(out, fh, indent=2, sort_keys=True)
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: a thin client of the HTTP service.

Every subcommand builds a request, sends it to the service (an in-process
instance by default, a remote one with --server), and writes the response
as CSV or JSON.  Exit codes: 0 success, 1 validation or usage error, 2
numerical failure; failures put one machine-readable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
import time

from . import __version__
from .artifacts import RunManifest, canonical_hash, emit_rows_csv, rows_to_text
from .errors import ConfigError
from .model import read_config_doc

SUBCOMMANDS = ("simulate", "stationary-cov", "cov-path", "rate-path", "riccati",
               "price", "verify-vt", "verify-all", "serve")


def _make_client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=None)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient
    from .service.app import create_app
    return TestClient(create_app())


def _fail(error_type: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error_type": error_type, "message": message}) + "\n")
    return 2 if error_type == "numerical" else 1


def _post(client, path: str, payload: dict):
    resp = client.post(path, json=payload)
    if resp.status_code == 200:
        return resp.json(), None
    try:
        body = resp.json()
    except ValueError:
        body = {}
    error_type = body.get("error_type", "validation")
    message = body.get("message")
    if message is None:
        message = json.dumps(body.get("detail", body))[:500]
    return None, (error_type, message)


def _write_manifest(out: str, subcommand: str, config_doc, seed, artifacts,
                    started: float) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        config_hash=canonical_hash(config_doc),
        seed=seed,
        artifacts=[str(a) for a in artifacts],
        wall_clock_utc=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        duration_s=round(time.time() - started, 6),
        version=__version__,
    )
    manifest.write(out + ".manifest.json")


def _emit_table(args, data, subcommand, config_doc, seed, started) -> int:
    columns, rows = data["columns"], data["rows"]
    if args.out:
        emit_rows_csv(columns, rows, args.out)
        _write_manifest(args.out, subcommand, config_doc, seed, [args.out], started)
    else:
        sys.stdout.write(rows_to_text(columns, rows))
    return 0


def _config_seed(doc: dict):
    sim = doc.get("simulation")
    if isinstance(sim, dict) and "seed" in sim:
        return sim["seed"]
    return None


def _table_command(args, endpoint: str, extra: dict, subcommand: str) -> int:
    doc = read_config_doc(args.config)
    started = time.time()
    client = _make_client(args.server)
    data, err = _post(client, endpoint, {"config": doc, **extra})
    if err:
        return _fail(*err)
    seed = extra.get("seed")
    if seed is None:
        seed = _config_seed(doc)
    return _emit_table(args, data, subcommand, doc, seed, started)


def cmd_simulate(args) -> int:
    extra = {"summary": bool(args.summary)}
    if args.seed is not None:
        extra["seed"] = args.seed
    if args.paths is not None:
        extra["n_paths"] = args.paths
    if args.dt is not None:
        extra["dt"] = args.dt
    return _table_command(args, "/simulate", extra, "simulate")


def cmd_stationary_cov(args) -> int:
    return _table_command(args, "/stationary-cov", {}, "stationary-cov")


def cmd_cov_path(args) -> int:
    extra = {"agent": args.agent, "t_end": args.t_end}
    if args.dt is not None:
        extra["dt"] = args.dt
    return _table_command(args, "/cov-path", extra, "cov-path")


def cmd_rate_path(args) -> int:
    extra = {}
    if args.seed is not None:
        extra["seed"] = args.seed
    if args.paths is not None:
        extra["n_paths"] = args.paths
    if args.dt is not None:
        extra["dt"] = args.dt
    return _table_command(args, "/rate-path", extra, "rate-path")


def cmd_riccati(args) -> int:
    extra = {}
    if args.tau_max is not None:
        extra["tau_max"] = args.tau_max
    if args.dtau is not None:
        extra["dtau"] = args.dtau
    return _table_command(args, "/riccati", extra, "riccati")


def cmd_price(args) -> int:
    doc = read_config_doc(args.config)
    payload: dict = {"config": doc}
    if args.zbar:
        try:
            with open(args.zbar) as fh:
                payload["zbar"] = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            return _fail("validation", f"cannot read zbar file {args.zbar}: {exc}")
    if args.t_max is not None:
        payload["t_max"] = args.t_max
    if args.tau_max is not None:
        payload["tau_max"] = args.tau_max
    if args.dtau is not None:
        payload["dtau"] = args.dtau
    if args.quad_points is not None:
        payload["quad_points"] = args.quad_points
    started = time.time()
    client = _make_client(args.server)
    data, err = _post(client, "/price", payload)
    if err:
        return _fail(*err)
    quote = {"S": data["S"], "error_estimate": data["error_estimate"],
             "T_max": data["T_max"], "tau_grid_size": data["tau_grid_size"],
             "S_truncated": data["S_truncated"], "tail_estimate": data["tail_estimate"]}
    text = json.dumps(quote, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _write_manifest(args.out, "price", doc, None, [args.out], started)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify_vt(args) -> int:
    doc = read_config_doc(args.config)
    payload: dict = {"config": doc, "seed": args.seed if args.seed is not None else 7}
    if args.paths is not None:
        payload["n_paths"] = args.paths
    if args.dt is not None:
        payload["dt"] = args.dt
    started = time.time()
    client = _make_client(args.server)
    data, err = _post(client, "/verify-vt", payload)
    if err:
        return _fail(*err)
    sys.stdout.write(rows_to_text(data["columns"], data["rows"]))
    failed = [row for row in data["rows"] if row[-1] != "yes"]
    if args.out:
        emit_rows_csv(data["columns"], data["rows"], args.out)
        _write_manifest(args.out, "verify-vt", doc, payload["seed"], [args.out], started)
    if failed:
        return _fail("numerical", f"{len(failed)} oracle comparisons outside 3 stderr")
    return 0


def _render_verify_table(body: dict) -> str:
    lines = [f"{'criterion':<34} {'status':<6} detail"]
    for c in body["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        lines.append(f"{c['cid'] + ' ' + c['name']:<34} {status:<6} {c['detail']}")
    lines.append(f"overall: {'PASS' if body['passed'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def cmd_verify_all(args) -> int:
    seed = args.seed if args.seed is not None else 7
    started = time.time()
    client = _make_client(args.server)
    data, err = _post(client, "/verify-all", {"seed": seed, "quick": bool(args.quick)})
    if err:
        return _fail(*err)
    sys.stdout.write(_render_verify_table(data))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(args.out, "verify-all", {}, seed, [args.out], started)
    if not data["passed"]:
        return _fail("numerical", "verification suite failed")
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service.app import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetbeliefs",
        description="heterogeneous-beliefs economy: filtering, simulation, and pricing",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--server", help="service base URL (default: in-process)")
        sp.add_argument("--seed", type=int, help="override the run seed")
        sp.add_argument("--out", help="output file (default: print to stdout)")

    sp = sub.add_parser("simulate", help="simulate paths to long-format CSV")
    common(sp)
    sp.add_argument("--paths", type=int, help="number of paths")
    sp.add_argument("--dt", type=float, help="grid step")
    sp.add_argument("--summary", action="store_true",
                    help="emit cross-path means/variances per time")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("stationary-cov", help="stationary covariance per agent")
    common(sp)
    sp.set_defaults(func=cmd_stationary_cov)

    sp = sub.add_parser("cov-path", help="transient covariance path from V = 0")
    common(sp)
    sp.add_argument("--agent", type=int, default=1, help="1-based agent index")
    sp.add_argument("--t-end", type=float, default=5.0, help="integration horizon")
    sp.add_argument("--dt", type=float, help="grid step")
    sp.set_defaults(func=cmd_cov_path)

    sp = sub.add_parser("rate-path", help="riskless rate and risk price along paths")
    common(sp)
    sp.add_argument("--paths", type=int, help="number of paths")
    sp.add_argument("--dt", type=float, help="grid step")
    sp.set_defaults(func=cmd_rate_path)

    sp = sub.add_parser("riccati", help="pricing ODE solution grids")
    common(sp)
    sp.add_argument("--tau-max", type=float, help="time-to-go horizon")
    sp.add_argument("--dtau", type=float, help="base integration step")
    sp.set_defaults(func=cmd_riccati)

    sp = sub.add_parser("price", help="stock price quote")
    common(sp)
    sp.add_argument("--zbar", help="JSON file with the stacked state vector")
    sp.add_argument("--t-max", type=float, help="quadrature truncation horizon")
    sp.add_argument("--tau-max", type=float, help="ODE horizon (>= t-max)")
    sp.add_argument("--dtau", type=float, help="base integration step")
    sp.add_argument("--quad-points", type=int, help="quadrature node count")
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("verify-vt", help="conditional-expectation oracle table")
    common(sp)
    sp.add_argument("--paths", type=int, help="Monte Carlo paths")
    sp.add_argument("--dt", type=float, help="Monte Carlo step")
    sp.set_defaults(func=cmd_verify_vt)

    sp = sub.add_parser("verify-all", help="run the full verification suite")
    common(sp, config_required=False)
    sp.add_argument("--quick", action="store_true", help="reduced Monte Carlo sizes")
    sp.set_defaults(func=cmd_verify_all)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("validation", str(exc))
    except Exception as exc:  # connection errors, unexpected failures
        return _fail("validation", f"{type(exc).__name__}: {exc}")


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

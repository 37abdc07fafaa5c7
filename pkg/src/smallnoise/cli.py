"""Command-line client for the smallnoise service.

Every verb except ``serve`` talks HTTP to the service layer: by default an
in-process application instance, or a remote one when --server is given.
Exit codes are a stable contract: 0 success (all gates pass), 1 runtime or
gate failure, 2 usage or configuration error.

Output files are byte-identical across reruns with the same config and
seed: sample CSVs are repr-formatted floats, and metrics.csv is rendered
by the experiment module's stable formatter.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_SAMPLE_TARGETS = ("w", "x0", "feller_endpoint")

# Config-file keys consumed by the CLI itself, not the experiment runner.
_CLI_ONLY_KEYS = ("out_dir", "verbosity")


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


def _make_client(server: str | None):
    if server is not None:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from starlette.testclient import TestClient

    from .service import create_app

    # raise_server_exceptions=False makes the in-process client behave like
    # a remote one: numerical failures arrive as HTTP 500, not tracebacks.
    return TestClient(create_app(), raise_server_exceptions=False)


def _detail(resp) -> str:
    try:
        body = resp.json()
    except Exception:
        return resp.text
    if isinstance(body, dict) and "detail" in body:
        detail = body["detail"]
        return detail if isinstance(detail, str) else json.dumps(detail)
    return resp.text


def _post(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    if resp.status_code in (400, 404, 422):
        raise UsageError(_detail(resp))
    raise RuntimeFailure(f"HTTP {resp.status_code}: {_detail(resp)}")


def _write_lines(path: Path, values: list[float]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{float(v)!r}\n" for v in values))


def _cmd_validate(args, client) -> int:
    if args.b != 1.0:
        raise UsageError("builtin models are normalized to b=1")
    data = _post(
        client, "/validate",
        {"model": args.model, "a": args.a, "grid_size": args.grid_size},
    )
    if data["ok"]:
        print(f"{data['model']}: ok ({data['grid_size']} grid points, "
              f"upper {data['grid_upper']:g})")
        return EXIT_OK
    for violation in data["violations"]:
        print(violation, file=sys.stderr)
    return EXIT_RUNTIME


def _cmd_sample(args, client) -> int:
    payload = {
        "target": args.target,
        "a": args.a,
        "b": args.b,
        "n": args.n,
        "seed": args.seed,
    }
    if args.model is not None:
        payload["model"] = args.model
    if args.t is not None:
        payload["t"] = args.t
    data = _post(client, "/sample", payload)
    out = Path(args.out) if args.out else Path(f"samples_{args.target}.csv")
    try:
        _write_lines(out, data["samples"])
    except OSError as exc:
        raise RuntimeFailure(f"cannot write {out}: {exc}")
    print(f"wrote {data['n']} samples to {out}")
    return EXIT_OK


def _load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def _cmd_experiment(args, client) -> int:
    data = _load_config_file(args.config)
    out_dir = data.pop("out_dir", "results")
    verbosity = data.pop("verbosity", 0)
    if not isinstance(verbosity, int):
        raise UsageError("verbosity must be an integer")

    # Flags override file values.
    overrides = {
        "model": args.model,
        "a": args.a,
        "b": args.b,
        "n_paths": args.n_paths,
        "t_horizon": args.t_horizon,
        "dt": args.dt,
        "c_split": args.c_split,
        "seed": args.seed,
        "threads": args.threads,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if args.epsilon:
        data["epsilon_ladder"] = args.epsilon
    if args.out is not None:
        out_dir = args.out

    if verbosity:
        print(f"running {data.get('experiment', '?')} "
              f"on {data.get('model', '?')} ...")
    report_dict = _post(client, "/experiment", data)

    from .experiment import ExperimentReport, MetricRow, write_report

    report = ExperimentReport(
        experiment=report_dict["experiment"],
        config=report_dict["config"],
        config_hash=report_dict["config_hash"],
        passed=report_dict["passed"],
        verdicts=report_dict["verdicts"],
        metrics=tuple(MetricRow(**row) for row in report_dict["metrics"]),
        diagnostics=report_dict["diagnostics"],
        failures=tuple(report_dict["failures"]),
        wall_clock_seconds=report_dict["wall_clock_seconds"],
    )
    try:
        write_report(report, out_dir)
    except OSError as exc:
        raise RuntimeFailure(f"cannot write into {out_dir}: {exc}")

    for name, ok in report.verdicts.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    for failure in report.failures:
        print(f"failure: {failure}", file=sys.stderr)
    print(f"report: {Path(out_dir) / 'report.json'}")
    return EXIT_OK if report.passed else EXIT_RUNTIME


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smallnoise",
        description="Simulation and verification lab for small-noise "
        "diffusions escaping an unstable equilibrium.",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running service; default runs in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a builtin model's assumptions")
    v.add_argument("--model", required=True)
    v.add_argument("--a", type=float, required=True, help="linear growth rate")
    v.add_argument("--b", type=float, default=1.0, help="diffusion slope at 0")
    v.add_argument("--grid-size", type=int, default=512)

    s = sub.add_parser("sample", help="draw samples to a single-column CSV")
    s.add_argument("--target", required=True, choices=_SAMPLE_TARGETS)
    s.add_argument("--model", default=None, help="required for target x0")
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--b", type=float, default=1.0)
    s.add_argument("--t", type=float, default=None,
                   help="time for target feller_endpoint")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None, help="output CSV path")

    e = sub.add_parser("experiment", help="run a named experiment from a config")
    e.add_argument("--config", required=True, help="JSON config file")
    e.add_argument("--model", default=None)
    e.add_argument("--a", type=float, default=None)
    e.add_argument("--b", type=float, default=None)
    e.add_argument("--epsilon", type=float, action="append", default=None,
                   help="ladder entry; repeat for the full ladder")
    e.add_argument("--n-paths", type=int, default=None)
    e.add_argument("--t-horizon", type=float, default=None)
    e.add_argument("--dt", type=float, default=None)
    e.add_argument("--c-split", type=float, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--out", default=None, help="output directory")
    e.add_argument("--threads", type=int, default=None)

    r = sub.add_parser("serve", help="run the HTTP service")
    r.add_argument("--host", default="127.0.0.1")
    r.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        with _make_client(args.server) as client:
            if args.command == "validate":
                return _cmd_validate(args, client)
            if args.command == "sample":
                return _cmd_sample(args, client)
            return _cmd_experiment(args, client)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command line client for the solver service.

Every subcommand except `serve` builds a JSON request, sends it to the
HTTP service, and formats the response.  By default the service runs
in-process over an ASGI transport; pass --server to talk to a remote
instance instead.  Either way the bytes written to disk are identical.

Exit codes: 0 success, 1 operational error (bad input, I/O, failed
convergence), 2 failed verification (hypothesis check or golden
comparison did not pass).
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED_CHECK = 2

_TIMEOUT = 600.0


class _ServiceError(Exception):
    """Non-2xx response from the service."""

    def __init__(self, status: int, error: str, message: str):
        super().__init__(message)
        self.status = status
        self.error = error
        self.message = message


def _post(path: str, payload: dict, server: str | None) -> dict:
    async def go() -> httpx.Response:
        if server is not None:
            async with httpx.AsyncClient(base_url=server, timeout=_TIMEOUT) as client:
                return await client.post(path, json=payload)
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app(), raise_app_exceptions=False)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://volterra.local", timeout=_TIMEOUT
        ) as client:
            return await client.post(path, json=payload)

    response = asyncio.run(go())
    if response.status_code != 200:
        try:
            body = response.json()
            error = body.get("error", "ServiceError")
            message = body.get("message", body.get("detail", response.text))
        except ValueError:
            error, message = "ServiceError", response.text
        raise _ServiceError(response.status_code, error, str(message))
    return response.json()


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        _write_text(out, text)


def _parse_bindings(pairs: list[str]) -> dict[str, float]:
    bindings = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise ValueError(f"binding {pair!r} is not of the form name=value")
        bindings[name.strip()] = float(value)
    return bindings


def _apply_threads(args) -> None:
    threads = getattr(args, "threads", None)
    if threads is not None:
        os.environ["VOLTERRA_THREADS"] = str(threads)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_expr_eval(args) -> int:
    payload = {"expression": args.expression, "bindings": _parse_bindings(args.bind)}
    body = _post("/expr/eval", payload, args.server)
    print(repr(body["value"]))
    return EXIT_OK


def _cmd_check(args) -> int:
    payload = {
        "config_text": _read_text(args.config),
        "n": args.n,
        "samples": args.samples,
        "seed": args.seed,
        "margin_members": args.members,
    }
    body = _post("/check", payload, args.server)
    for section in body["sections"]:
        flag = "PASS" if section["passed"] else "FAIL"
        print(f"[{flag}] {section['name']}: {section['detail']}")
        for item in section["items"]:
            print(f"       {item}")
    if body["passed"]:
        print("all checks passed")
        return EXIT_OK
    print("verification failed")
    return EXIT_FAILED_CHECK


def _cmd_weights(args) -> int:
    payload = {"config_text": _read_text(args.config), "n_max": args.n_max}
    body = _post("/weights", payload, args.server)
    _emit(body["csv"], args.out)
    if args.out is not None:
        print(
            f"schedule for members {body['rows'][0]['n']}..{body['rows'][-1]['n']} "
            f"written to {args.out}"
        )
    return EXIT_OK


def _cmd_solve(args) -> int:
    _apply_threads(args)
    payload = {
        "config_text": _read_text(args.config),
        "schedule_csv": _read_text(args.schedule) if args.schedule else None,
        "overrides": {
            "n": args.n,
            "h": args.h,
            "tol_fix": args.tol,
            "max_iter": args.max_iter,
            "strategy": args.strategy,
        },
    }
    body = _post("/solve", payload, args.server)
    _emit(body["csv"], args.out)
    summary_stream = sys.stdout if args.out is not None else sys.stderr
    print(body["summary"], file=summary_stream)
    return EXIT_OK if body["converged"] else EXIT_ERROR


def _cmd_example(args) -> int:
    _apply_threads(args)
    traces = dict(_parse_bindings_text(args.trace))
    payload = {
        "name": args.name,
        "f": args.f,
        "zero_boundary": args.zero_boundary,
        "traces": traces,
        "corner": args.corner,
        "lam": args.lam,
        "amplitude": args.amplitude,
        "n": args.n,
        "h": args.h,
        "solve": not args.no_solve,
    }
    body = _post("/example", payload, args.server)
    if args.write_config is not None:
        _write_text(args.write_config, body["config_text"])
        print(f"config written to {args.write_config}")
    if body.get("csv"):
        if args.out is not None:
            _write_text(args.out, body["csv"])
            print(f"solution written to {args.out}")
        elif args.write_config is None:
            sys.stdout.write(body["csv"])
    print(body["summary"], file=sys.stderr)
    solve = body.get("solve")
    if solve is not None and not solve["converged"]:
        return EXIT_ERROR
    comparison = body.get("comparison")
    if comparison is not None and not comparison["passed"]:
        return EXIT_FAILED_CHECK
    return EXIT_OK


def _parse_bindings_text(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise ValueError(f"trace {pair!r} is not of the form axes=expression")
        out[name.strip()] = value
    return out


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("volterra.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volterra",
        description="solve and verify functional Volterra integral inclusions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument(
            "--server",
            default=None,
            help="base URL of a running service (default: run in-process)",
        )

    p = sub.add_parser("expr-eval", help="evaluate an expression")
    p.add_argument("expression")
    p.add_argument(
        "--bind",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="bind a variable (repeatable)",
    )
    add_server(p)
    p.set_defaults(handler=_cmd_expr_eval)

    p = sub.add_parser("check", help="verify solvability hypotheses for a config")
    p.add_argument("--config", required=True, help="problem config file")
    p.add_argument("--n", type=int, default=None, help="exhaustion member to check")
    p.add_argument("--samples", type=int, default=200, help="random probe count")
    p.add_argument("--seed", type=int, default=0, help="probe RNG seed")
    p.add_argument(
        "--members", type=int, default=None, help="members for the margin sweep"
    )
    add_server(p)
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("weights", help="build a weight schedule and emit it as CSV")
    p.add_argument("--config", required=True, help="problem config file")
    p.add_argument("--n-max", type=int, default=None, help="last member to schedule")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    add_server(p)
    p.set_defaults(handler=_cmd_weights)

    p = sub.add_parser("solve", help="run successive approximation")
    p.add_argument("--config", required=True, help="problem config file")
    p.add_argument("--schedule", default=None, help="reuse a weight schedule CSV")
    p.add_argument("--out", default=None, help="write solution CSV here")
    p.add_argument("--n", type=int, default=None, help="override exhaustion member")
    p.add_argument("--h", type=float, default=None, help="override grid step")
    p.add_argument("--tol", type=float, default=None, help="override fixed point tolerance")
    p.add_argument("--max-iter", type=int, default=None, help="override iteration cap")
    p.add_argument(
        "--strategy",
        choices=("midpoint", "lower", "upper"),
        default=None,
        help="selection strategy for set valued right-hand sides",
    )
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    add_server(p)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("example", help="run a builtin example problem")
    p.add_argument("name", help="second-kind | oscillating | goursat")
    p.add_argument("--f", default=None, help="integrand expression (goursat)")
    p.add_argument(
        "--zero-boundary",
        action="store_true",
        help="use zero boundary traces (goursat)",
    )
    p.add_argument(
        "--trace",
        action="append",
        default=[],
        metavar="AXES=EXPR",
        help="boundary trace on the face where the listed axes are free, "
        "e.g. --trace x1='x1 ^ 2' (goursat, repeatable)",
    )
    p.add_argument(
        "--corner", type=float, default=0.0, help="value at the origin (goursat)"
    )
    p.add_argument("--lam", type=float, default=None, help="modulus parameter (oscillating)")
    p.add_argument(
        "--amplitude", type=float, default=None, help="forcing amplitude (second-kind)"
    )
    p.add_argument("--n", type=int, default=None, help="exhaustion member")
    p.add_argument("--h", type=float, default=None, help="grid step")
    p.add_argument("--out", default=None, help="write solution CSV here")
    p.add_argument(
        "--write-config", default=None, help="write the generated config here"
    )
    p.add_argument(
        "--no-solve", action="store_true", help="generate the config without solving"
    )
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    add_server(p)
    p.set_defaults(handler=_cmd_example)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _ServiceError as err:
        print(f"error [{err.error}]: {err.message}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, httpx.HTTPError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points.

    emsdispatch serve --port 8350 --store journal.jsonl --fixtures builtin
    emsdispatch fixtures dump --out ./seed
    emsdispatch fixtures load --store journal.jsonl --dir ./seed
    emsdispatch fixtures export --store journal.jsonl --out ./backup
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import DispatchError
from .registry import TABLE_COLUMNS, Registry, builtin_fixture_dir
from .server import serve
from .storage import open_backend


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emsdispatch",
        description="Emergency dispatch service: nearest-unit assignment over HTTP/JSON.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("serve", help="run the HTTP service until interrupted")
    sp.add_argument("--config", help="key=value config file")
    sp.add_argument("--host", help="bind address (default 127.0.0.1)")
    sp.add_argument("--port", type=int, help="bind port (default 8350)")
    sp.add_argument("--store", help='"memory" or a journal file path')
    sp.add_argument("--hospital-msisdn", dest="hospital_msisdn",
                    help="hospital SMS number")
    sp.add_argument("--sms-transport", dest="sms_transport",
                    help='"recording" or "file:<path>"')
    sp.add_argument("--radius-km", dest="radius_km", type=float,
                    help="great-circle sphere radius (default 6371.0)")
    sp.add_argument("--poll-timeout-s", dest="poll_timeout_s", type=float,
                    help="default long-poll wait in seconds")
    sp.add_argument("--geocoder", help='"null" or "table"')
    sp.add_argument("--fixtures", help='seed data: "builtin" or a CSV directory')

    fx = sub.add_parser("fixtures", help="seed data utilities")
    fxsub = fx.add_subparsers(dest="fixtures_command", required=True)

    dump = fxsub.add_parser("dump", help="write the built-in CSV fixtures to a directory")
    dump.add_argument("--out", required=True)

    load = fxsub.add_parser("load", help="import a CSV fixture directory into a store")
    load.add_argument("--store", required=True)
    load.add_argument("--dir", required=True)

    export = fxsub.add_parser("export", help="export all tables from a store as CSV")
    export.add_argument("--store", required=True)
    export.add_argument("--out", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "fixtures":
            return _cmd_fixtures(args)
    except DispatchError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command}")


def _cmd_serve(args) -> int:
    config = load_config(
        args.config,
        host=args.host,
        port=args.port,
        store=args.store,
        hospital_msisdn=args.hospital_msisdn,
        sms_transport=args.sms_transport,
        radius_km=args.radius_km,
        poll_timeout_s=args.poll_timeout_s,
        geocoder=args.geocoder,
    )
    return serve(config, fixtures=args.fixtures)


def _cmd_fixtures(args) -> int:
    import shutil
    from pathlib import Path

    if args.fixtures_command == "dump":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for csv_path in sorted(Path(builtin_fixture_dir()).glob("*.csv")):
            shutil.copy(csv_path, out / csv_path.name)
            print(f"wrote {out / csv_path.name}")
        return 0

    backend = open_backend(args.store)
    try:
        registry = Registry(backend)
        if args.fixtures_command == "load":
            registry.load_fixture_dir(args.dir)
            counts = registry.counts()
            print(f"loaded: {counts}")
            return 0
        if args.fixtures_command == "export":
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            for table in TABLE_COLUMNS:
                target = out / f"{table}.csv"
                target.write_text(registry.export_table(table), encoding="utf-8")
                print(f"wrote {target}")
            return 0
    finally:
        backend.close()
    raise AssertionError(f"unhandled fixtures command {args.fixtures_command}")


if __name__ == "__main__":
    sys.exit(main())

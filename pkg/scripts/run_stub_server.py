"""Serve the local stub summarizer/generator until interrupted.

    python scripts/run_stub_server.py --port 8765
    sumctx experiment --corpus ... --generator remote --generator-endpoint http://127.0.0.1:8765 ...
"""

import argparse

from sumctx.stub_server import serve


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--fail-first", type=int, default=0,
                        help="answer the first N requests with HTTP 500")
    args = parser.parse_args()
    print(f"stub listening on http://{args.host}:{args.port}", flush=True)
    serve(args.host, args.port, fail_first=args.fail_first)


if __name__ == "__main__":
    main()

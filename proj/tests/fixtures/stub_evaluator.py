#!/usr/bin/env python3
"""Wire-protocol stub used by the subprocess tests.

loss = theta_cont["x"] when present, otherwise the sum of all sent values.
"""
import argparse
import json
import os
import sys
import time

parser = argparse.ArgumentParser()
parser.add_argument("--constraints", type=int, default=0)
parser.add_argument("--mode", default="echo",
                    choices=["echo", "error", "malformed", "wrong-id", "sleep", "crash-once", "crash-always",
                             "no-handshake", "short-constraints"])
parser.add_argument("--marker", default="")
parser.add_argument("--sleep", type=float, default=2.0)
args = parser.parse_args()


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


hello = sys.stdin.readline()
if not hello or "hello" not in json.loads(hello):
    sys.exit(1)
if args.mode == "no-handshake":
    sys.exit(0)
send({"ready": {"constraints": args.constraints}})

for line in sys.stdin:
    req = json.loads(line)
    rid = req["id"]
    if args.mode == "crash-always":
        sys.exit(7)
    if args.mode == "crash-once" and not os.path.exists(args.marker):
        open(args.marker, "w").close()
        sys.exit(9)
    if args.mode == "sleep":
        time.sleep(args.sleep)
    if args.mode == "malformed":
        sys.stdout.write("{not json\n")
        sys.stdout.flush()
        continue
    if args.mode == "error":
        send({"id": rid, "error": "training failed"})
        continue
    cont = req["theta_cont"]
    if "x" in cont:
        loss = cont["x"]
    else:
        loss = sum(cont.values()) + sum(req["theta_int"].values())
    m = args.constraints - 1 if args.mode == "short-constraints" else args.constraints
    send({"id": rid + 1 if args.mode == "wrong-id" else rid,
          "loss": loss,
          "constraints": [0.1 * (i + 1) for i in range(m)]})

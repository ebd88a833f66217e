#!/usr/bin/env python3
"""Emit a renderer sampling plan from a factor-spec config.

Without --config, uses the built-in four-factor lighting/exposure/defocus/
noise setup. Each output line is a JSON record with per-factor renderer
settings and normalized severities.
"""

import argparse
import json
import sys

from cdra.rendermap import default_render_config, emit_plan, specs_from_dict


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="factor-spec JSON path")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="JSONL path (default stdout)")
    args = ap.parse_args()

    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    else:
        cfg = default_render_config()
    specs, edges = specs_from_dict(cfg)
    plan = emit_plan(specs, edges, args.n, args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(plan.to_jsonl())
        print(f"wrote {len(plan.records)} records to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(plan.to_jsonl())


if __name__ == "__main__":
    main()

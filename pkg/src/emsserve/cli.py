"""Command-line surface: run experiments, compare reports, build latency
profiles, exercise the medicine helpers, and generate episodes.

Exit codes: 0 on success, 2 on validation errors, 1 on IO failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import episodes as ep
from . import medkit, metrics, netlink, profiling
from .errors import EmsServeError
from .models import COST_KIND, HEADER_KIND, default_family, eval_encoder, eval_header
from .scheduler import CachePolicy


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emsserve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode in one serving mode")
    p_run.add_argument("--episode", required=True, help="1|2|3 or a path to an episode file")
    p_run.add_argument("--mode", required=True, choices=["baseline", "emsserve"])
    p_run.add_argument("--profile", default="synthetic-glass", help="profile JSON path or preset name")
    p_run.add_argument("--device", default="glass")
    p_run.add_argument("--edge", default="edge-4c")
    p_run.add_argument("--trace", default=None, help="trace CSV path or 'constant:<bps>'")
    p_run.add_argument("--clock", default="virtual", choices=["virtual", "wall"])
    p_run.add_argument("--wall-scale", type=float, default=0.01)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--offload", default="off", choices=["on", "off"])
    p_run.add_argument("--parallel-threshold", type=float, default=0.010)
    p_run.add_argument("--out", default=None, help="output path (.json or .csv; default: stdout JSON)")

    p_cmp = sub.add_parser("compare", help="speedup of a cached run over a baseline run")
    p_cmp.add_argument("--base", required=True)
    p_cmp.add_argument("--ems", required=True)
    p_cmp.add_argument("--out", default=None)

    p_prof = sub.add_parser("profile", help="measure synthetic module latencies on this host")
    p_prof.add_argument("--runs", type=int, default=profiling.DEFAULT_TOTAL_RUNS)
    p_prof.add_argument("--keep", type=int, default=profiling.DEFAULT_KEEP_LAST)
    p_prof.add_argument("--device", default="local")
    p_prof.add_argument("--out", required=True)

    p_med = sub.add_parser("med", help="medicine name matching and dose math")
    med_sub = p_med.add_subparsers(dest="med_command", required=True)
    p_match = med_sub.add_parser("match")
    p_match.add_argument("--token", required=True)
    p_match.add_argument("--dict", dest="dict_path", default=None)
    p_match.add_argument("--max-rel-ed", type=float, default=medkit.DEFAULT_MAX_RELATIVE_ED)
    p_dose = med_sub.add_parser("dose")
    p_dose.add_argument("--quantity", type=float, required=True)
    p_dose.add_argument("--concentration", type=float, required=True)

    p_eps = sub.add_parser("episodes", help="episode utilities")
    eps_sub = p_eps.add_subparsers(dest="episodes_command", required=True)
    p_gen = eps_sub.add_parser("gen")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--max-vitals", type=int, default=30)
    p_gen.add_argument("--max-images", type=int, default=10)
    p_gen.add_argument("--out", default=None)

    return parser


def _load_profile(spec: str) -> profiling.LatencyProfile:
    if spec in profiling.PRESETS:
        return profiling.preset_profile(spec)
    return profiling.profile_store_load(spec)


def _load_trace(spec: str | None) -> netlink.LinkTrace | None:
    if spec is None:
        return None
    if spec.startswith("constant:"):
        return netlink.constant_trace(float(spec.split(":", 1)[1]))
    return netlink.load_trace(spec)


def _load_episode(spec: str) -> ep.Episode:
    if spec.isdigit():
        return ep.builtin_episode(int(spec))
    return ep.load_episode(spec)


def _cmd_run(args) -> int:
    episode = _load_episode(args.episode)
    config = ep.RunConfig(
        profile=_load_profile(args.profile),
        device=args.device,
        edge=args.edge,
        trace=_load_trace(args.trace),
        clock=args.clock,
        wall_scale=args.wall_scale,
        policy=CachePolicy(parallel_threshold=args.parallel_threshold),
        offload_enabled=args.offload == "on",
        seed=args.seed,
    )
    report = ep.run(episode, args.mode, config)
    if args.out is None:
        sys.stdout.write(metrics.report_to_json(report))
    else:
        fmt = "csv" if args.out.endswith(".csv") else "json"
        metrics.export(report, fmt, args.out)
        print(f"wrote {args.out} (total {report.total_s!r} s over {len(report.per_event)} events)")
    return 0


def _cmd_compare(args) -> int:
    base = metrics.load_report(args.base)
    ems = metrics.load_report(args.ems)
    cmp = metrics.speedup(base, ems)
    text = metrics.comparison_to_json(cmp)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} (speedup {cmp.speedup:.2f}x)")
    return 0


def _cmd_profile(args) -> int:
    family = default_family()
    profile = profiling.LatencyProfile()
    for model in family:
        for encoder in model.encoders:
            def runner(enc=encoder):
                eval_encoder(enc, f"probe-{time.monotonic_ns()}", 0)
                return None

            seconds = profiling.measure(runner, args.runs, args.keep)
            profile.set(encoder.module_id, args.device, seconds)
            profile.set(COST_KIND[encoder.modality], args.device, seconds)

        def header_runner(m=model):
            features = {
                e.modality: eval_encoder(e, f"probe-{time.monotonic_ns()}", 0) for e in m.encoders
            }
            eval_header(m, features)
            return None

        seconds = profiling.measure(header_runner, args.runs, args.keep)
        profile.set(model.header_id, args.device, seconds)
        profile.set(HEADER_KIND, args.device, seconds)
    profiling.profile_store_save(profile, args.out)
    print(f"wrote {args.out} ({len(profile.entries)} entries for device {args.device!r})")
    return 0


def _cmd_med(args) -> int:
    if args.med_command == "match":
        dictionary = (
            medkit.sample_dictionary()
            if args.dict_path is None
            else medkit.load_dictionary(args.dict_path)
        )
        entry = medkit.ed_match(args.token, dictionary, args.max_rel_ed)
        doc = {
            "token": args.token,
            "match": None if entry is None else entry.name,
            "concentrations": [] if entry is None else list(entry.concentrations),
            "diseases": [] if entry is None else list(entry.diseases),
        }
        print(json.dumps(doc, sort_keys=True))
        return 0
    dose = medkit.med_math(args.quantity, args.concentration)
    print(
        json.dumps(
            {
                "volume_ml": dose.volume_ml,
                "quantity_mg": dose.quantity_mg,
                "concentration_mg_per_ml": dose.concentration_mg_per_ml,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_episodes(args) -> int:
    episode = ep.generate_episode(args.seed, args.max_vitals, args.max_images)
    text = ep.episode_to_file(episode)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(episode.events)} events)")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "profile": _cmd_profile,
    "med": _cmd_med,
    "episodes": _cmd_episodes,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (EmsServeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

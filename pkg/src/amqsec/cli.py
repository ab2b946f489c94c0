"""Command-line front end: bound calculators, the planner, experiments,
attacks, and game runners.

Every randomized subcommand takes --seed and is a pure function of it;
the seed is echoed in the output header.  Optional --assert-le /
--assert-ge compare the subcommand's headline number against a
threshold and exit with status 3 on violation, which lets CI scripts
gate on measured values.  Exit status 2 means the invocation itself was
bad.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from importlib import metadata

from . import analysis, attacks, curves, experiments, games
from .amq import AmqDescriptor, QueryBudget, make_instance
from .oracle import CoinSource, FunctionOracle

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_THRESHOLD = 3

OUT_DIR_ENV = "AMQSEC_OUT_DIR"


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


def _resolve_out(path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(os.environ.get(OUT_DIR_ENV, "."), path)


def _require(args, names: list[str], context: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names
               if getattr(args, n) is None]
    if missing:
        raise ValueError(f"{context} needs {', '.join(missing)}")


def _pp_string(args, names: list[str]) -> str:
    return " ".join(f"{n}={getattr(args, n)}" for n in names
                    if getattr(args, n, None) is not None)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1,
                        help="64-bit seed; all randomness derives from it")
    common.add_argument("--json", action="store_true",
                        help="emit one JSON object instead of text lines")
    common.add_argument("--assert-le", type=float, default=None,
                        metavar="X", help="exit 3 unless headline <= X")
    common.add_argument("--assert-ge", type=float, default=None,
                        metavar="X", help="exit 3 unless headline >= X")

    parser = argparse.ArgumentParser(
        prog="amqsec",
        description="Planning, bounds, experiments, and security games "
                    "for keyed approximate-membership filters.")
    sub = parser.add_subparsers(dest="command", required=True)

    fp = sub.add_parser("fp-bound", parents=[common],
                        help="honest false-positive bound and estimate")
    fp.add_argument("--family", required=True,
                    choices=["bloom", "cuckoo", "wrapped"])
    fp.add_argument("--m", type=int)
    fp.add_argument("--k", type=int)
    fp.add_argument("--n", type=int)
    fp.add_argument("--s", type=int)
    fp.add_argument("--lambda-t", dest="lam_t", type=int)
    fp.add_argument("--wrap-bits", type=int, default=256)

    adv = sub.add_parser("adv-bound", parents=[common],
                         help="worst-case false-positive bound under attack")
    adv.add_argument("--family", required=True,
                     choices=["bloom", "cuckoo", "wrapped"])
    adv.add_argument("--m", type=int)
    adv.add_argument("--k", type=int)
    adv.add_argument("--s", type=int)
    adv.add_argument("--lambda-i", dest="lam_i", type=int)
    adv.add_argument("--lambda-t", dest="lam_t", type=int)
    adv.add_argument("--num", type=int, default=500)
    adv.add_argument("--n", type=int, required=True)
    adv.add_argument("--q-u", type=int, required=True)
    adv.add_argument("--q-t", type=int, required=True)
    adv.add_argument("--immutable", action="store_true",
                     help="no post-representation insertions")
    adv.add_argument("--eps-prf-log2", type=float, default=-256.0)

    priv = sub.add_parser("privacy-bound", parents=[common],
                          help="closed-form privacy guessing bounds")
    priv.add_argument("--q-u", type=int, required=True)
    priv.add_argument("--q-t", type=int, required=True)
    priv.add_argument("--min-entropy", type=float, required=True,
                      help="min-entropy of the stored set, in bits")
    priv.add_argument("--eps-prf-log2", type=float, default=-256.0)

    plan = sub.add_parser("plan", parents=[common],
                          help="storage sweep and adversarial sizing ratio")
    plan.add_argument("--family", required=True, choices=["bloom", "cuckoo"])
    plan.add_argument("--log-n", type=int, required=True)
    plan.add_argument("--log-q", type=int, required=True)
    plan.add_argument("--target-fp-log2", type=float, default=-10.0)
    plan.add_argument("--eps-prf-log2", type=float, default=-256.0)
    plan.add_argument("--out", help="curve file; .csv or .svg")
    plan.add_argument("--format", choices=["csv", "svg", "json"],
                      help="override the format implied by --out")

    exp = sub.add_parser("experiment", help="Monte-Carlo measurements")
    esub = exp.add_subparsers(dest="subcommand", required=True)

    efp = esub.add_parser("fp", parents=[common],
                          help="empirical honest false-positive rate")
    efp.add_argument("--family", required=True, choices=["bloom", "cuckoo"])
    efp.add_argument("--m", type=int)
    efp.add_argument("--k", type=int)
    efp.add_argument("--n", type=int)
    efp.add_argument("--s", type=int)
    efp.add_argument("--lambda-i", dest="lam_i", type=int)
    efp.add_argument("--lambda-t", dest="lam_t", type=int)
    efp.add_argument("--num", type=int, default=500)
    efp.add_argument("--target-load", type=float, default=0.9)
    efp.add_argument("--probes", type=int, default=100_000)

    elf = esub.add_parser("load-factor", parents=[common],
                          help="fill fraction at the first refused insert")
    elf.add_argument("--s", type=int, required=True)
    elf.add_argument("--lambda-i", dest="lam_i", type=int, required=True)
    elf.add_argument("--lambda-t", dest="lam_t", type=int, required=True)
    elf.add_argument("--num", type=int, default=500)
    elf.add_argument("--trials", type=int, default=16)
    elf.add_argument("--plain", action="store_true",
                     help="measure the unwrapped filter instead")

    enai = esub.add_parser("nai-check", parents=[common],
                           help="real-vs-ideal state distribution distance")
    enai.add_argument("--m", type=int, required=True)
    enai.add_argument("--k", type=int, required=True)
    enai.add_argument("--n", type=int, required=True)
    enai.add_argument("--trials", type=int, default=100_000)

    atk = sub.add_parser("attack", help="scripted attacks")
    asub = atk.add_subparsers(dest="subcommand", required=True)

    apol = asub.add_parser("pollution", parents=[common],
                           help="greedy bit-packing against a Bloom filter")
    apol.add_argument("--m", type=int, required=True)
    apol.add_argument("--k", type=int, required=True)
    apol.add_argument("--q-u", type=int, default=256)
    apol.add_argument("--q-t", type=int, default=2000)
    apol.add_argument("--keyed", action="store_true",
                      help="attack a keyed filter instead of the public-hash one")

    atsc = asub.add_parser("tsc", parents=[common],
                           help="make a disjoint target set read as present")
    atsc.add_argument("--m", type=int, required=True)
    atsc.add_argument("--k", type=int, required=True)
    atsc.add_argument("--targets", type=int, default=4)
    atsc.add_argument("--q-u", type=int, default=64)
    atsc.add_argument("--keyed", action="store_true")

    api = asub.add_parser("cuckoo-pi", parents=[common],
                          help="eviction-leak distinguisher advantage")
    api.add_argument("--s", type=int, default=1)
    api.add_argument("--lambda-i", dest="lam_i", type=int, default=8)
    api.add_argument("--lambda-t", dest="lam_t", type=int, default=8)
    api.add_argument("--num", type=int, default=500)
    api.add_argument("--q-u", type=int, default=110)
    api.add_argument("--q-v", type=int, default=120)
    api.add_argument("--trials", type=int, default=100)
    api.add_argument("--wrapped", action="store_true",
                     help="run against the PRF-wrapped variant")

    game = sub.add_parser("game", help="security game runners")
    gsub = game.add_subparsers(dest="subcommand", required=True)

    groi = gsub.add_parser("roi", parents=[common],
                           help="real-or-ideal advantage of a reveal adversary")
    groi.add_argument("--family", default="bloom",
                      choices=["bloom", "wrapped"])
    groi.add_argument("--m", type=int)
    groi.add_argument("--k", type=int)
    groi.add_argument("--s", type=int)
    groi.add_argument("--lambda-i", dest="lam_i", type=int)
    groi.add_argument("--lambda-t", dest="lam_t", type=int)
    groi.add_argument("--num", type=int, default=500)
    groi.add_argument("--rep-size", type=int, default=3)
    groi.add_argument("--trials", type=int, default=1000)
    groi.add_argument("--transcript", help="write trial-0 transcripts (JSONL)")

    gpi = gsub.add_parser("pi", parents=[common],
                          help="permutation-invariance advantage")
    gpi.add_argument("--s", type=int, default=1)
    gpi.add_argument("--lambda-i", dest="lam_i", type=int, default=8)
    gpi.add_argument("--lambda-t", dest="lam_t", type=int, default=8)
    gpi.add_argument("--num", type=int, default=500)
    gpi.add_argument("--q-u", type=int, default=110)
    gpi.add_argument("--q-v", type=int, default=120)
    gpi.add_argument("--trials", type=int, default=100)
    gpi.add_argument("--wrapped", action="store_true")
    gpi.add_argument("--transcript", help="write trial-0 transcripts (JSONL)")

    ger = gsub.add_parser("elem-rep", parents=[common],
                          help="representation-privacy advantage")
    ger.add_argument("--m", type=int, default=2 ** 15)
    ger.add_argument("--k", type=int, default=10)
    ger.add_argument("--stored", type=int, default=2)
    ger.add_argument("--variant", default="elem-rep",
                     choices=["elem-rep", "rep"])
    ger.add_argument("--trials", type=int, default=100)

    return parser


# ---------------------------------------------------------------------------
# Handlers.  Each returns (payload, headline, meta).


def _cmd_fp_bound(args):
    if args.family == "bloom":
        _require(args, ["m", "k", "n"], "bloom fp-bound")
        fp = analysis.bloom_nai_fp_bound(args.m, args.k, args.n)
        return ({"bound": fp.bound, "estimate": fp.estimate}, fp.bound,
                {"pp": _pp_string(args, ["m", "k", "n"])})
    _require(args, ["s", "lam_t"], "cuckoo fp-bound")
    wrap = args.wrap_bits if args.family == "wrapped" else None
    bound = analysis.cuckoo_nai_fp_bound(args.s, args.lam_t, wrap)
    pp_names = ["s", "lam_t"] + (["wrap_bits"] if wrap else [])
    return {"bound": bound}, bound, {"pp": _pp_string(args, pp_names)}


def _cmd_adv_bound(args):
    eps_prf = 2.0 ** args.eps_prf_log2
    budget = QueryBudget(n=args.n, q_u=args.q_u, q_t=args.q_t, q_v=0)
    if args.family == "bloom":
        _require(args, ["m", "k"], "bloom adv-bound")
        nai = analysis.bloom_nai_fp_bound(args.m, args.k,
                                          args.n + args.q_u).bound
        descriptor = AmqDescriptor.bloom(args.m, args.k)
        pp_names = ["m", "k"]
    else:
        _require(args, ["s", "lam_i", "lam_t"], "cuckoo adv-bound")
        wrap = 256 if args.family == "wrapped" else None
        nai = analysis.cuckoo_nai_fp_bound(args.s, args.lam_t, wrap)
        factory = (AmqDescriptor.prf_wrapped_cuckoo if args.family == "wrapped"
                   else AmqDescriptor.cuckoo)
        descriptor = factory(args.s, args.lam_i, args.lam_t, args.num)
        pp_names = ["s", "lam_i", "lam_t", "num"]
    report = analysis.adversarial_correctness_bound(
        eps_prf, budget, nai, descriptor, immutable=args.immutable)
    payload = {
        "nai_fp": report.nai_fp,
        "adversarial_bound": report.adversarial_bound,
        "storage_bits": report.storage_bits,
        "immutable": report.immutable,
    }
    return (payload, report.adversarial_bound,
            {"pp": _pp_string(args, pp_names), "budget": str(budget)})


def _cmd_privacy_bound(args):
    eps_prf = 2.0 ** args.eps_prf_log2
    report = analysis.privacy_guessing_bound(args.q_u, args.q_t,
                                             args.min_entropy, eps_prf)
    payload = {"guess_bound": report.guess_bound,
               "rep_privacy_bound": report.rep_privacy_bound}
    return (payload, report.rep_privacy_bound,
            {"budget": f"q_u={args.q_u} q_t={args.q_t}",
             "min_entropy": args.min_entropy})


def _cmd_plan(args):
    n = 1 << args.log_n
    q = 1 << args.log_q
    target = 2.0 ** args.target_fp_log2
    eps_prf = 2.0 ** args.eps_prf_log2
    grid = analysis.default_grid(args.family, n, q, target, eps_prf)
    points = analysis.parameter_sweep(args.family, target, q, n, grid,
                                      eps_prf)
    report = analysis.storage_ratio_at_target(args.family, n, q, target,
                                              eps_prf)
    meta = {
        "pp": f"family={args.family} grid_points={len(points)}",
        "budget": f"n=2^{args.log_n} q=2^{args.log_q}",
        "target_fp_log2": args.target_fp_log2,
    }
    if args.out:
        fmt = args.format or os.path.splitext(args.out)[1].lstrip(".")
        path = _resolve_out(args.out)
        file_meta = {"tool": f"amqsec {_version()}", "seed": args.seed, **meta}
        with open(path, "w", encoding="utf-8") as fh:
            if fmt == "svg":
                curves.write_curve_svg(points, fh, file_meta)
            elif fmt == "csv":
                curves.write_curve_csv(points, fh, file_meta)
            elif fmt == "json":
                json.dump({"meta": file_meta,
                           "points": curves.curve_rows(points)}, fh, indent=1)
            else:
                raise ValueError(f"cannot infer a curve format from {fmt!r}")
    payload = {
        "ratio": report.ratio,
        "best_shape": report.best.shape,
        "honest_storage_bits": report.best.honest_storage_bits,
        "adversarial_storage_bits": report.best.adversarial_storage_bits,
        "per_shape_ratio": {str(sz.shape): sz.ratio
                            for sz in report.per_shape},
        "sweep_points": len(points),
    }
    return payload, report.ratio, meta


def _cmd_experiment_fp(args):
    if args.family == "bloom":
        _require(args, ["m", "k", "n"], "bloom fp experiment")
        rep = experiments.bloom_fp_experiment(args.m, args.k, args.n,
                                              args.probes, args.seed)
        fp = analysis.bloom_nai_fp_bound(args.m, args.k, args.n)
        payload = {"empirical_fp": rep.empirical_fp, "bound": fp.bound,
                   "estimate": fp.estimate, "probes": rep.probes}
        meta_pp = _pp_string(args, ["m", "k", "n"])
    else:
        _require(args, ["s", "lam_i", "lam_t"], "cuckoo fp experiment")
        rep = experiments.cuckoo_fp_experiment(args.s, args.lam_i, args.lam_t,
                                               args.num, args.probes,
                                               args.seed, args.target_load)
        payload = {"empirical_fp": rep.empirical_fp,
                   "bound": analysis.cuckoo_nai_fp_bound(args.s, args.lam_t),
                   "load_fraction": rep.load_fraction, "probes": rep.probes}
        meta_pp = _pp_string(args, ["s", "lam_i", "lam_t", "num"])
    return payload, rep.empirical_fp, {"pp": meta_pp}


def _cmd_experiment_load_factor(args):
    rep = experiments.load_factor_experiment(
        args.s, args.lam_i, args.lam_t, args.num, args.trials, args.seed,
        wrapped=not args.plain)
    payload = {"mean_fraction": rep.mean_fraction,
               "fractions": rep.fractions, "trials": args.trials}
    return (payload, rep.mean_fraction,
            {"pp": _pp_string(args, ["s", "lam_i", "lam_t", "num"])})


def _cmd_experiment_nai_check(args):
    rep = experiments.nai_check(args.m, args.k, args.n, args.trials,
                                args.seed)
    payload = {"distance": rep.distance, "support": rep.support,
               "trials": rep.trials}
    return payload, rep.distance, {"pp": _pp_string(args, ["m", "k", "n"])}


def _pollution_target(args, key: bytes):
    if args.keyed:
        oracle = FunctionOracle(mode="keyed", key=key)
        return make_instance(AmqDescriptor.bloom(args.m, args.k), oracle)
    return attacks.WeakHashBloom(args.m, args.k)


def _cmd_attack_pollution(args):
    setup = CoinSource(args.seed)
    key = setup.bytes(32)
    target = _pollution_target(args, key)
    budget = QueryBudget(n=0, q_u=args.q_u, q_t=args.q_t, q_v=0)
    rep = attacks.attack_pollution_bloom(target, budget, setup.next_u64())
    payload = {
        "achieved_fp": rep.achieved_fp,
        "honest_bound": rep.honest_bound,
        "envelope": rep.envelope,
        "sigma": rep.sigma,
        "inserted": rep.inserted,
        "probes": rep.probes,
        "target": "keyed" if args.keyed else "public-hash",
    }
    return (payload, rep.achieved_fp,
            {"pp": _pp_string(args, ["m", "k"]), "budget": str(budget)})


def _cmd_attack_tsc(args):
    setup = CoinSource(args.seed)
    key = setup.bytes(32)
    target_filter = _pollution_target(args, key)
    targets = [setup.element() for _ in range(args.targets)]
    budget = QueryBudget(n=0, q_u=args.q_u, q_t=args.targets, q_v=0)
    rep = attacks.attack_target_set_coverage(targets, target_filter, budget,
                                             setup.next_u64())
    payload = {
        "success": rep.success,
        "inserted": rep.inserted,
        "needed_bits": rep.needed_bits,
        "covered_needed": rep.covered_needed,
        "target": "keyed" if args.keyed else "public-hash",
    }
    return (payload, 1.0 if rep.success else 0.0,
            {"pp": _pp_string(args, ["m", "k"]), "budget": str(budget)})


def _pi_descriptor(args):
    factory = (AmqDescriptor.prf_wrapped_cuckoo if args.wrapped
               else AmqDescriptor.cuckoo)
    return factory(args.s, args.lam_i, args.lam_t, args.num)


def _cmd_attack_cuckoo_pi(args):
    descriptor = _pi_descriptor(args)
    budget = QueryBudget(n=1, q_u=args.q_u, q_t=0, q_v=args.q_v)
    adv = attacks.attack_cuckoo_pi(budget)
    est, hw = games.estimate_advantage(games.pi_game_runner(descriptor), adv,
                                       args.trials, args.seed)
    payload = {"advantage": est, "half_width": hw, "trials": args.trials,
               "target": descriptor.family}
    return (payload, est,
            {"pp": _pp_string(args, ["s", "lam_i", "lam_t", "num"]),
             "budget": str(budget)})


def _dump_transcripts(path: str, runs: list[tuple[int, list[dict]]]) -> None:
    with open(_resolve_out(path), "w", encoding="utf-8") as fh:
        for trial, records in runs:
            for line in games.transcript_json_lines(trial, records):
                fh.write(line + "\n")


def _cmd_game_roi(args):
    if args.family == "bloom":
        _require(args, ["m", "k"], "roi game on bloom")
        descriptor = AmqDescriptor.bloom(args.m, args.k)
    else:
        _require(args, ["s", "lam_i", "lam_t"], "roi game on wrapped cuckoo")
        descriptor = AmqDescriptor.prf_wrapped_cuckoo(args.s, args.lam_i,
                                                      args.lam_t, args.num)
    rep_size = args.rep_size
    budget = QueryBudget(n=rep_size, q_u=0, q_t=0, q_v=1)

    def script(oracles, coins):
        oracles.rep([coins.element() for _ in range(rep_size)])
        return oracles.reveal()

    adv = games.AdversaryStrategy(budget=budget, run=script)

    def distinguisher(out) -> int:
        return hashlib.sha256(out).digest()[0] & 1

    est, hw = games.estimate_advantage(
        games.roi_game_runner(descriptor, distinguisher), adv, args.trials,
        args.seed)
    if args.transcript:
        runs = []
        for world in ("real", "ideal"):
            run = games.run_real_or_ideal(adv, descriptor, world, args.seed,
                                          record_transcript=True)
            runs.append((0, run.transcript))
        _dump_transcripts(args.transcript, runs)
    payload = {"advantage": est, "half_width": hw, "trials": args.trials}
    return (payload, est,
            {"pp": f"family={descriptor.family}", "budget": str(budget)})


def _cmd_game_pi(args):
    descriptor = _pi_descriptor(args)
    budget = QueryBudget(n=1, q_u=args.q_u, q_t=0, q_v=args.q_v)
    adv = attacks.attack_cuckoo_pi(budget)
    est, hw = games.estimate_advantage(games.pi_game_runner(descriptor), adv,
                                       args.trials, args.seed)
    if args.transcript:
        runs = []
        for c in (0, 1):
            records: list[dict] = []
            games.run_pi_game(adv, descriptor, c, args.seed,
                              transcript=records)
            runs.append((0, records))
        _dump_transcripts(args.transcript, runs)
    payload = {"advantage": est, "half_width": hw, "trials": args.trials,
               "target": descriptor.family}
    return (payload, est,
            {"pp": _pp_string(args, ["s", "lam_i", "lam_t", "num"]),
             "budget": str(budget)})


def _cmd_game_elem_rep(args):
    descriptor = AmqDescriptor.bloom(args.m, args.k)
    variant = args.variant.replace("-", "_")
    fixed = CoinSource(args.seed ^ 0xF1ED).element()

    def sample_stored(coins):
        extra = [coins.element() for _ in range(max(args.stored - 1, 0))]
        return [fixed] + extra

    def script(oracles, coins):
        return (oracles.qry(fixed), oracles.qry(coins.element()))

    adv2 = games.AdversaryStrategy(
        budget=QueryBudget(n=args.stored, q_u=0, q_t=2, q_v=0), run=script)

    def saw_membership(out, stored_set) -> int:
        return 1 if out[0] else 0

    runner = games.elem_rep_game_runner(descriptor, sample_stored,
                                        saw_membership, variant=variant)
    est, hw = games.estimate_advantage(runner, adv2, args.trials, args.seed)
    payload = {"advantage": est, "half_width": hw, "variant": args.variant,
               "trials": args.trials}
    return (payload, est,
            {"pp": _pp_string(args, ["m", "k", "stored"])})


_HANDLERS = {
    ("fp-bound", None): _cmd_fp_bound,
    ("adv-bound", None): _cmd_adv_bound,
    ("privacy-bound", None): _cmd_privacy_bound,
    ("plan", None): _cmd_plan,
    ("experiment", "fp"): _cmd_experiment_fp,
    ("experiment", "load-factor"): _cmd_experiment_load_factor,
    ("experiment", "nai-check"): _cmd_experiment_nai_check,
    ("attack", "pollution"): _cmd_attack_pollution,
    ("attack", "tsc"): _cmd_attack_tsc,
    ("attack", "cuckoo-pi"): _cmd_attack_cuckoo_pi,
    ("game", "roi"): _cmd_game_roi,
    ("game", "pi"): _cmd_game_pi,
    ("game", "elem-rep"): _cmd_game_elem_rep,
}


def _render_text(payload: dict, meta: dict, seed: int) -> str:
    lines = [f"# amqsec {_version()}", f"# seed: {seed}"]
    for key, value in meta.items():
        lines.append(f"# {key}: {value}")
    for key, value in payload.items():
        if isinstance(value, float):
            lines.append(f"{key}: {value!r}")
        else:
            lines.append(f"{key}: {value}")
    return "\n".join(lines)


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    handler = _HANDLERS[(args.command, getattr(args, "subcommand", None))]
    try:
        payload, headline, meta = handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        doc = {"tool": "amqsec", "version": _version(), "seed": args.seed,
               "meta": meta, "results": payload}
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        print(_render_text(payload, meta, args.seed))
    if args.assert_le is not None and not headline <= args.assert_le:
        print(f"threshold failed: {headline!r} > {args.assert_le!r}",
              file=sys.stderr)
        return EXIT_THRESHOLD
    if args.assert_ge is not None and not headline >= args.assert_ge:
        print(f"threshold failed: {headline!r} < {args.assert_ge!r}",
              file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

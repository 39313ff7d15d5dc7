"""Seeded trial batches from the command line, one JSON record per line."""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from . import adaptive, adversarial, learner, nonadaptive
from .core import Distribution, SimulatedOracle, SampleAccount, uniform
from .specs import SpecError, parse_distribution

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRIAL_ERROR = 3

PROPERTIES = {
    "uniformity": learner.uniformity_distance,
    "uniblock-even": lambda nu: learner.uniblock_distance(nu, "even"),
    "uniblock-odd": lambda nu: learner.uniblock_distance(nu, "odd"),
}


@dataclass
class TrialRecord:
    trial: int
    algorithm: str
    n: int
    epsilon: float
    delta: float
    scale: float
    seed: int
    verdict: str | None
    samples_total: int
    samples_by_class: dict
    wall_ms: float | None = None
    extra: dict = field(default_factory=dict)
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        return cls(**json.loads(line))


@dataclass(frozen=True)
class Config:
    command: str
    n: int
    epsilon: float
    delta: float
    scale: float
    dist: Distribution
    known: Distribution | None
    other: Distribution | None
    mode: str
    recursion_threshold: int | None
    repetitions: int | None
    estimator_scale: float | None
    prop: str
    threshold: float | None
    q_size: int
    emissions: int
    budget: int | None
    bits: str | None


def _account_fields(account: SampleAccount) -> tuple[int, dict]:
    d = account.as_dict()
    return d["total"], d["by_class"]


def _verdict_result(v) -> tuple[str, SampleAccount, dict]:
    return v.decision.value, v.account, {}


def _run_uniformity(cfg, o, rng):
    known = cfg.known or uniform(cfg.n)
    params = adaptive.AdaptiveParams(cfg.epsilon, cfg.delta, cfg.scale, mode=cfg.mode)
    return _verdict_result(adaptive.test_near_uniformity(o, known, params, rng))


def _run_identity(cfg, o, rng):
    params = adaptive.AdaptiveParams(cfg.epsilon, cfg.delta, cfg.scale, cfg.recursion_threshold, cfg.mode)
    return _verdict_result(adaptive.test_identity_adaptive(o, cfg.known, params, rng))


def _run_identity_nonadaptive(cfg, o, rng):
    v = nonadaptive.test_identity_nonadaptive(
        o, cfg.known, cfg.epsilon, cfg.delta, rng, scale=cfg.scale, repetitions=cfg.repetitions
    )
    return _verdict_result(v)


def _run_uniformity_nonadaptive(cfg, o, rng):
    known = cfg.known or uniform(cfg.n)
    v = adaptive.amplify(
        lambda r: nonadaptive.test_near_uniformity_nonadaptive(o, known, cfg.epsilon, r, scale=cfg.scale),
        cfg.delta,
        rng,
        repetitions=cfg.repetitions,
    )
    return _verdict_result(v)


def _run_learn(cfg, o, rng):
    res = learner.learn_distribution(
        o, cfg.epsilon, cfg.delta, rng, scale=cfg.scale, estimator_scale=cfg.estimator_scale
    )
    reference = cfg.known or cfg.dist
    extra = {
        "min_perm_tv": learner.min_permutation_tv(res.dist, reference),
        "bucketization_failed": res.counts.failed,
        "uniform_fallback": res.uniform_fallback,
        "samples_drawn": res.samples,
    }
    return None, res.account, extra


def _run_label_invariant(cfg, o, rng):
    v = learner.test_label_invariant(
        o,
        PROPERTIES[cfg.prop],
        cfg.epsilon,
        cfg.delta,
        rng,
        threshold=cfg.threshold,
        scale=cfg.scale,
        estimator_scale=cfg.estimator_scale,
    )
    return v.decision.value, v.account, {"property": cfg.prop, "property_distance": v.trace[0]["property_distance"]}


def _run_compare(cfg, o, rng, seed):
    o2 = SimulatedOracle(cfg.other, np.random.SeedSequence(seed).spawn(3)[2])
    v = learner.test_identity_up_to_relabeling(
        o, o2, cfg.epsilon, cfg.delta, rng, scale=cfg.scale, estimator_scale=cfg.estimator_scale
    )
    return v.decision.value, v.account, {"min_perm_tv": v.trace[0]["min_permutation_tv"]}


def _run_reduce(cfg, rng):
    half = cfg.n // 2
    x = adversarial.parse_bits(cfg.bits) if cfg.bits is not None else rng.integers(0, 2, size=half)
    sampler = adversarial.ReductionSampler(x, rng, budget=cfg.budget)
    Q = np.sort(rng.choice(cfg.n, size=min(cfg.q_size, cfg.n), replace=False))
    law = adversarial.reduction_law(x, Q)
    hits = dict.fromkeys(law, 0)
    failed = False
    try:
        for _ in range(cfg.emissions):
            hits[sampler.sample(Q)] += 1
    except adversarial.ReductionFailed:
        failed = True
    emitted = sampler.emissions
    tv = 0.5 * sum(abs(hits[i] / emitted - p) for i, p in law.items()) if emitted else None
    extra = {
        "bit_queries": sampler.queries,
        "emissions": emitted,
        "queries_per_emission": sampler.queries / emitted if emitted else None,
        "reduction_failed": failed,
        "empirical_tv": tv,
    }
    return None, SampleAccount(), extra


RUNNERS = {
    "test-uniformity": _run_uniformity,
    "test-identity": _run_identity,
    "test-identity-nonadaptive": _run_identity_nonadaptive,
    "test-uniformity-nonadaptive": _run_uniformity_nonadaptive,
    "learn": _run_learn,
    "test-label-invariant": _run_label_invariant,
    "compare-unknown": _run_compare,
    "reduce-string": None,
}


def trial_seeds(master: int, trials: int) -> list[int]:
    """Per-trial integer seeds spawned from the master seed; independent of scheduling."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(master).spawn(trials)]


def run_trial(cfg: Config, index: int, seed: int, timing: bool = False) -> TrialRecord:
    oracle_seed, algo_seed, _ = np.random.SeedSequence(seed).spawn(3)
    rng = np.random.default_rng(algo_seed)
    start = time.perf_counter()
    decision, account, extra, error = None, SampleAccount(), {}, None
    try:
        if cfg.command == "reduce-string":
            decision, account, extra = _run_reduce(cfg, rng)
        else:
            o = SimulatedOracle(cfg.dist, oracle_seed)
            if cfg.command == "compare-unknown":
                decision, account, extra = _run_compare(cfg, o, rng, seed)
            else:
                decision, account, extra = RUNNERS[cfg.command](cfg, o, rng)
    except Exception as exc:  # recorded per trial; the batch carries on
        error = f"{type(exc).__name__}: {exc}"
    total, by_class = _account_fields(account)
    wall = round((time.perf_counter() - start) * 1000.0, 3) if timing else None
    return TrialRecord(
        index, cfg.command, cfg.n, cfg.epsilon, cfg.delta, cfg.scale, seed, decision, total, by_class, wall, extra, error
    )


def _run_indexed(args):
    return run_trial(*args)


def run_batch(cfg: Config, trials: int, master_seed: int, jobs: int = 1, timing: bool = False):
    tasks = [(cfg, i, s, timing) for i, s in enumerate(trial_seeds(master_seed, trials))]
    if jobs <= 1:
        for t in tasks:
            yield run_trial(*t)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_run_indexed, tasks)


def summarize(records: list[TrialRecord]) -> dict:
    ok = [r for r in records if r.error is None]
    decided = [r for r in ok if r.verdict is not None]
    accepts = sum(r.verdict == "accept" for r in decided)
    summary = {
        "summary": True,
        "trials": len(records),
        "errors": len(records) - len(ok),
        "mean_samples": float(np.mean([r.samples_total for r in ok])) if ok else None,
    }
    if decided:
        frac = accepts / len(decided)
        lo, hi = proportion_confint(accepts, len(decided), alpha=0.05, method="wilson")
        # the interval always contains the point estimate; guard against float drift at 0 and 1
        summary.update(accept_fraction=frac, accept_ci95=[min(float(lo), frac), max(float(hi), frac)])
    numeric = {}
    for r in ok:
        for key, value in r.extra.items():
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                numeric.setdefault(key, []).append(value)
    if numeric:
        summary["mean_extra"] = {k: float(np.mean(v)) for k, v in sorted(numeric.items())}
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condsamp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--n", type=int, help="domain size (taken from --dist when omitted)")
        p.add_argument("--epsilon", type=float, default=0.3)
        p.add_argument("--delta", type=float, default=1 / 3)
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--scale", type=float, default=1.0)
        p.add_argument("--dist", help="spec of the unknown distribution (default uniform:<n>)")
        p.add_argument("--known", help="spec of the known or reference distribution")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--mode", choices=adaptive.MODES, default=adaptive.EMPIRICAL)
        p.add_argument("--timing", action="store_true", help="record wall-clock time per trial")
        if name == "test-identity":
            p.add_argument("--recursion-threshold", type=int)
        if name in ("test-identity-nonadaptive", "test-uniformity-nonadaptive"):
            p.add_argument("--repetitions", type=int)
        if name in ("learn", "test-label-invariant", "compare-unknown"):
            p.add_argument("--estimator-scale", type=float)
        if name == "test-label-invariant":
            p.add_argument("--property", choices=sorted(PROPERTIES), default="uniformity")
            p.add_argument("--threshold", type=float)
        if name == "compare-unknown":
            p.add_argument("--other", required=True, help="spec of the second unknown distribution")
        if name == "reduce-string":
            p.add_argument("--bits", help="file holding the bits of x (random when omitted)")
            p.add_argument("--q-size", type=int, default=8)
            p.add_argument("--emissions", type=int, default=1000)
            p.add_argument("--budget", type=int)
    return parser


def make_config(args) -> Config:
    if args.trials < 1:
        raise SpecError("--trials must be positive")
    if not 0 < args.epsilon < 1 or not 0 < args.delta < 1:
        raise SpecError("--epsilon and --delta must lie in (0, 1)")
    if args.scale <= 0:
        raise SpecError("--scale must be positive")
    get = lambda name: getattr(args, name, None)  # noqa: E731
    bits = None
    if args.command == "reduce-string":
        if get("bits"):
            try:
                bits = open(get("bits")).read().strip()
            except OSError as exc:
                raise SpecError(str(exc)) from None
            n = 2 * len(bits)
        elif args.n:
            n = args.n
        else:
            raise SpecError("reduce-string needs --n or --bits")
        if n % 2:
            raise SpecError("reduce-string needs an even --n")
        dist = adversarial.string_distribution(adversarial.balanced_extend(bits)) if bits else uniform(n)
    else:
        if args.dist:
            dist = parse_distribution(args.dist)
        elif args.n:
            dist = uniform(args.n)
        else:
            raise SpecError("give --dist or --n")
        n = dist.n
        if args.n and args.n != n:
            raise SpecError(f"--n {args.n} disagrees with the distribution's domain size {n}")
    known = parse_distribution(args.known) if args.known else None
    if known is not None and known.n != n:
        raise SpecError("--known has a different domain size")
    other = parse_distribution(get("other")) if get("other") else None
    if other is not None and other.n != n:
        raise SpecError("--other has a different domain size")
    if args.command in ("test-identity", "test-identity-nonadaptive") and known is None:
        raise SpecError(f"{args.command} needs --known")
    return Config(
        command=args.command,
        n=n,
        epsilon=args.epsilon,
        delta=args.delta,
        scale=args.scale,
        dist=dist,
        known=known,
        other=other,
        mode=args.mode,
        recursion_threshold=get("recursion_threshold"),
        repetitions=get("repetitions"),
        estimator_scale=get("estimator_scale"),
        prop=get("property") or "uniformity",
        threshold=get("threshold"),
        q_size=get("q_size") or 8,
        emissions=get("emissions") or 1000,
        budget=get("budget"),
        bits=bits,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
    except (SpecError, ValueError) as exc:
        print(f"condsamp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    records = []
    for rec in run_batch(cfg, args.trials, args.seed, args.jobs, args.timing):
        records.append(rec)
        print(rec.to_json(), flush=True)
    summary = summarize(records)
    print(json.dumps(summary, sort_keys=True))
    line = f"{cfg.command}: {summary['trials']} trials, {summary['errors']} errors"
    if "accept_fraction" in summary:
        lo, hi = summary["accept_ci95"]
        line += f", accept {summary['accept_fraction']:.3f} (95% CI {lo:.3f}-{hi:.3f})"
    if summary["mean_samples"] is not None:
        line += f", mean samples {summary['mean_samples']:.4g}"
    print(line, file=sys.stderr)
    return EXIT_TRIAL_ERROR if summary["errors"] else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

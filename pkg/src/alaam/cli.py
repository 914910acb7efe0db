"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence.
Every stochastic subcommand requires ``--seed``.  ``--config FILE`` reads
``key = value`` lines whose keys are long option names (``out-dir`` or
``out_dir``); command-line flags override them, and repeated keys build up
repeatable options.  Each invocation writes ``manifest.txt`` to its output
directory in the same format, so ``--config manifest.txt`` repeats it.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ee import (EEConfig, read_run_csv, run_ee, run_file, status_file, summarize_run,
                 write_run_csv, write_status)
from .effects import Model, parse_model_text
from .errors import ALAAMError, DataError, DegenerateModel, Diverged, ModelError, NoConvergedRuns, StudyError
from .inference import GOF_THRESHOLDS, degeneracy_check, gof_test, pool_runs
from .network import (KINDS, AttributeTable, OutcomeVector, bind_outcome, load_attribute_files,
                      load_network, load_outcome, load_zones, write_outcome)
from .sa import SAConfig, estimate_sa, format_report
from .sampler import SimOptions, simulate_outcomes, write_samples_csv
from .studylab import StudyConfig, erdos_renyi, generate_synthetic_attributes, run_study

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3
ATTR_KINDS = ("binary", "continuous", "categorical")
_META_KEYS = {"command", "version"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _attr_spec(text: str) -> tuple[str, str]:
    kind, sep, path = text.partition("=")
    if not sep or kind not in ATTR_KINDS or not path:
        raise argparse.ArgumentTypeError(f"expected KIND=PATH with KIND in {ATTR_KINDS}, got {text!r}")
    return kind, path


def _theta(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _override(text: str) -> tuple[str, str, float]:
    arm, sep, rest = text.partition(":")
    eff, sep2, val = rest.rpartition("=")
    try:
        return arm, eff, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ARM:EFFECT=VALUE, got {text!r}") from None


def _data_args(p, outcome=True):
    p.add_argument("--network", help="Pajek network file")
    p.add_argument("--kind", choices=KINDS, help="network kind")
    if outcome:
        p.add_argument("--outcome", help="outcome file (0/1/NA per line)")
    p.add_argument("--attrs", action="append", type=_attr_spec, metavar="KIND=PATH",
                   help="attribute file; KIND is binary, continuous or categorical (repeatable)")
    p.add_argument("--zones", help="snowball zone file; outermost-zone outcomes are held fixed")
    p.add_argument("--model", help='effects, e.g. "Density, Contagion, oOb:smoker"')


def _common(p):
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--out-dir", default=".", help="output directory (default: current)")
    p.add_argument("--config", help="key = value defaults file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alaam", description="ALAAM estimation, simulation and goodness of fit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("estimate-sa", help="stochastic-approximation estimate")
    _data_args(p)
    _common(p)
    p.add_argument("--theta", type=_theta, help="starting values (default: logit-incidence Density, else 0)")
    p.add_argument("--m3", type=int, default=1000, help="phase-3 samples")
    p.add_argument("--max-restarts", type=int, default=2)

    p = sub.add_parser("estimate-ee", help="equilibrium-expectation runs")
    _data_args(p)
    _common(p)
    p.add_argument("--runs", type=int, default=1, help="number of runs")
    p.add_argument("--run-index", type=int, help="execute only this run")
    p.add_argument("--r", type=float, default=0.01, help="learning rate")
    p.add_argument("--c", type=float, default=0.01, help="step floor")
    p.add_argument("--ms", type=int, default=1000, help="proposals per EE iteration")
    p.add_argument("--mee", type=int, default=50000, help="EE iterations")
    p.add_argument("--burnin", type=int, default=1000, help="iterations dropped before thinning")
    p.add_argument("--interval", type=int, default=100, help="thinning interval")
    p.add_argument("--init-steps", type=int, default=100, help="contrastive-divergence steps")

    p = sub.add_parser("pool", help="pool run_*.csv files in --out-dir")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--config")
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--interval", type=int, default=100)
    p.add_argument("--r", type=float, default=0.01)
    p.add_argument("--c", type=float, default=0.01)

    for name, helptext in (("simulate", "simulate outcomes at --theta"),
                           ("gof", "goodness-of-fit t-ratios at --theta")):
        p = sub.add_parser(name, help=helptext)
        _data_args(p)
        _common(p)
        p.add_argument("--theta", type=_theta, help="parameter values in --model order")
        p.add_argument("--samples", type=int, default=100, help="retained samples")
        p.add_argument("--burnin", type=int, help="burn-in proposals (default 1000 N)")
        p.add_argument("--interval", type=int, help="proposals between samples (default 10 N)")
        if name == "gof":
            p.add_argument("--extra-effects", default="", help="out-of-model effects to test")
            p.add_argument("--threshold", type=float, default=2.0, choices=GOF_THRESHOLDS,
                           help="out-of-model |t| threshold")
            p.add_argument("--degeneracy", action="store_true", help="also write a degeneracy check")

    p = sub.add_parser("study", help="simulation study")
    _data_args(p, outcome=False)
    _common(p)
    p.add_argument("--theta", type=_theta, help="generating values in --model order")
    p.add_argument("--nodes", type=int, default=500, help="synthetic network size")
    p.add_argument("--mean-degree", type=float, default=8.0)
    p.add_argument("--samples", type=int, default=20, help="simulated outcome vectors")
    p.add_argument("--runs", type=int, default=20, help="EE runs per sample")
    p.add_argument("--estimator", choices=("EE", "SA"), default="EE")
    p.add_argument("--null", action="append", metavar="EFFECT", help="add a zero-valued arm (repeatable)")
    p.add_argument("--null-override", action="append", type=_override, metavar="ARM:EFFECT=VALUE",
                   help="generating value override in a null arm, e.g. Activity:Density=-7")
    p.add_argument("--ms", type=int, default=1000)
    p.add_argument("--mee", type=int, default=50000)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--interval", type=int, default=100)
    p.add_argument("--r", type=float, default=0.01)
    p.add_argument("--workers", type=int, default=1)
    return parser


REQUIRED = {
    "estimate-sa": ("network", "kind", "outcome", "model", "seed"),
    "estimate-ee": ("network", "kind", "outcome", "model", "seed"),
    "pool": (),
    "simulate": ("network", "kind", "model", "theta", "seed"),
    "gof": ("network", "kind", "outcome", "model", "theta", "seed"),
    "study": ("model", "theta", "seed"),
}


def read_config(path) -> list[tuple[str, str]]:
    pairs = []
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        pairs.append((key.strip().replace("-", "_"), value.strip()))
    return pairs


def _apply_config(sub: argparse.ArgumentParser, pairs, argv) -> argparse.Namespace:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults: dict[str, object] = {}
    for key, value in pairs:
        if key in _META_KEYS:
            continue
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        if action.nargs == 0:
            converted = value.lower() in ("1", "true", "yes")
        else:
            try:
                converted = action.type(value) if action.type else value
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key}: {exc}") from None
            if action.choices is not None and converted not in action.choices:
                raise UsageError(f"config key {key}: {value!r} is not one of {list(action.choices)}")
        if isinstance(action, argparse._AppendAction):
            defaults.setdefault(key, []).append(converted)
        else:
            defaults[key] = converted
    sub.set_defaults(**defaults)
    ns = sub.parse_args(argv)
    # appended flags extend config lists; replace instead so flags override
    for key, action in actions.items():
        if isinstance(action, argparse._AppendAction) and key in defaults:
            given = getattr(ns, key)
            if given is not None and len(given) > len(defaults[key]):
                setattr(ns, key, given[len(defaults[key]):])
    return ns


def _glue_values(argv):
    """``--theta -1,0.5`` becomes ``--theta=-1,0.5`` so argparse does not read a flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a == "--theta" and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def parse(argv) -> argparse.Namespace:
    argv = _glue_values(argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("alaam: a subcommand is required (see --help)")
    if getattr(ns, "config", None):
        sub = parser._subparsers._group_actions[0].choices[ns.command]
        rest = argv[argv.index(ns.command) + 1:]
        command = ns.command
        ns = _apply_config(sub, read_config(ns.config), rest)
        ns.command = command
    missing = [k for k in REQUIRED[ns.command] if getattr(ns, k, None) is None]
    if missing:
        raise UsageError(f"alaam {ns.command}: missing required option(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))
    return ns


def write_manifest(ns: argparse.Namespace, out_dir: Path) -> None:
    lines = [f"command = {ns.command}", f"version = {__version__}"]
    for key, value in sorted(vars(ns).items()):
        if key in ("command", "config") or value is None:
            continue
        if key == "attrs":
            lines += [f"attrs = {k}={p}" for k, p in value]
        elif key == "null_override":
            lines += [f"null_override = {a}:{e}={v!r}" for a, e, v in value]
        elif isinstance(value, list) and key == "null":
            lines += [f"null = {v}" for v in value]
        elif key == "theta":
            lines.append("theta = " + ",".join(repr(float(v)) for v in value))
        else:
            lines.append(f"{key} = {value}")
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _load(ns, need_outcome=True):
    net = load_network(ns.network, ns.kind)
    attrs = load_attribute_files(ns.attrs or [], net.num_nodes) if ns.attrs else AttributeTable(net.num_nodes)
    model = Model(parse_model_text(ns.model), net, attrs)
    outcome = None
    zones = load_zones(ns.zones, net.num_nodes) if ns.zones else None
    if need_outcome or getattr(ns, "outcome", None):
        outcome = bind_outcome(net, load_outcome(ns.outcome, net.num_nodes), zones)
    elif zones is not None:
        outcome = bind_outcome(net, OutcomeVector(np.zeros(net.num_nodes, dtype=np.int8)), zones)
    return net, attrs, model, outcome


def _check_theta(theta, model):
    if len(theta) != model.p:
        raise UsageError(f"--theta has {len(theta)} values but the model has {model.p} effects")
    return np.array(theta, dtype=np.float64)


def cmd_estimate_sa(ns, out: Path) -> int:
    net, attrs, model, outcome = _load(ns)
    theta0 = _check_theta(ns.theta, model) if ns.theta else None
    cfg = SAConfig(M3=ns.m3, maxRestarts=ns.max_restarts)
    res = estimate_sa(model, outcome, cfg, theta0, seed=ns.seed)
    report = res.report() + f"converged = {str(res.converged).lower()}\nrestarts = {res.restartsUsed}\n"
    (out / "sa_estimates.txt").write_text(report)
    with open(out / "sa_estimates.csv", "w") as f:
        f.write("effect,estimate,stdError,tRatio\n")
        for j, n in enumerate(model.names):
            f.write(f"{n},{res.theta[j]!r},{res.stdError[j]!r},{res.tRatios[j]!r}\n")
    sys.stdout.write(report)
    return EXIT_OK if res.converged else EXIT_NOCONV


def _ee_config(ns) -> EEConfig:
    return EEConfig(Ms=ns.ms, Mee=ns.mee, r=ns.r, c=ns.c, burninIters=ns.burnin,
                    thinInterval=ns.interval, initSteps=ns.init_steps)


def cmd_estimate_ee(ns, out: Path) -> int:
    net, attrs, model, outcome = _load(ns)
    cfg = _ee_config(ns)
    if ns.runs < 1:
        raise UsageError("--runs must be at least 1")
    if ns.run_index is not None and not 0 <= ns.run_index < ns.runs:
        raise UsageError("--run-index must lie in [0, --runs)")
    indices = [ns.run_index] if ns.run_index is not None else range(ns.runs)
    estimates = []
    for j in indices:
        chain = run_ee(model, outcome, cfg, seed=ns.seed, run_index=j)
        est = summarize_run(chain, cfg)
        write_run_csv(chain, model.names, run_file(out, j))
        write_status(est, status_file(out, j))
        estimates.append(est)
    if ns.run_index is not None:
        return EXIT_OK if estimates[0].converged else EXIT_NOCONV
    try:
        pooled = pool_runs(estimates, model.names)
    except NoConvergedRuns as exc:
        print(f"alaam: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    pooled.write_csv(out / "pooled_estimates.csv")
    sys.stdout.write(_pooled_text(pooled))
    return EXIT_OK


def _pooled_text(pooled) -> str:
    return format_report(pooled.names, pooled.theta, pooled.stdError) + f"Nc = {pooled.Nc} of {pooled.totalRuns}\n"


def cmd_pool(ns, out: Path) -> int:
    files = sorted((p for p in out.glob("run_*.csv") if re.fullmatch(r"run_\d+", p.stem)),
                   key=lambda p: int(p.stem[4:]))
    if not files:
        raise DataError(f"no run_*.csv files in {out}")
    estimates, names = [], None
    for f in files:
        chain = read_run_csv(f)
        if names is None:
            names = chain.names
        elif chain.names != names:
            raise DataError("run files have different effects", f)
        # a diverged run is truncated; its summary does not use Mee
        mee = max(len(chain.acceptanceRates), ns.burnin + 1)
        cfg = EEConfig(Mee=mee, burninIters=ns.burnin, thinInterval=ns.interval, r=ns.r, c=ns.c)
        estimates.append(summarize_run(chain, cfg))
    try:
        pooled = pool_runs(estimates, names)
    except NoConvergedRuns as exc:
        print(f"alaam: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    pooled.write_csv(out / "pooled_estimates.csv")
    sys.stdout.write(_pooled_text(pooled))
    return EXIT_OK


def _sim_options(ns, n) -> SimOptions:
    d = SimOptions.default(n)
    return SimOptions(burnin=d.burnin if ns.burnin is None else ns.burnin,
                      interval=d.interval if ns.interval is None else ns.interval,
                      sample_count=ns.samples)


def cmd_simulate(ns, out: Path) -> int:
    net, attrs, model, outcome = _load(ns, need_outcome=False)
    theta = _check_theta(ns.theta, model)
    init = outcome if outcome is not None else OutcomeVector(np.zeros(net.num_nodes, dtype=np.int8))
    res = simulate_outcomes(model, theta, _sim_options(ns, net.num_nodes), init, ns.seed)
    write_samples_csv(res, model.names, out / "samples.csv")
    write_outcome(res.final, out / "final_outcome.txt")
    return EXIT_OK


def cmd_gof(ns, out: Path) -> int:
    net, attrs, model, outcome = _load(ns)
    theta = _check_theta(ns.theta, model)
    extra = parse_model_text(ns.extra_effects) if ns.extra_effects.strip() else []
    opts = _sim_options(ns, net.num_nodes)
    report = gof_test(model, extra, outcome, theta, opts, ns.seed, ns.threshold)
    (out / "gof_report.txt").write_text(report.text())
    sys.stdout.write(report.text())
    if ns.degeneracy:
        degeneracy_check(model, outcome, theta, opts, ns.seed, out_dir=out)
    return EXIT_OK


def cmd_study(ns, out: Path) -> int:
    if ns.network:
        if not ns.kind:
            raise UsageError("--kind is required with --network")
        net = load_network(ns.network, ns.kind)
    else:
        net = erdos_renyi(ns.nodes, ns.mean_degree, seed=ns.seed)
    attrs = load_attribute_files(ns.attrs, net.num_nodes) if ns.attrs else generate_synthetic_attributes(net, ns.seed)
    ee = EEConfig(Ms=ns.ms, Mee=ns.mee, r=ns.r, burninIters=ns.burnin, thinInterval=ns.interval)
    base = StudyConfig.from_text(net, attrs, ns.model, ns.theta, sampleCount=ns.samples,
                                 runsPerSample=ns.runs, estimator=ns.estimator, ee=ee, seed=ns.seed)
    base.model()  # fail fast on a model that does not fit the data
    overrides: dict[str, dict[str, float]] = {}
    for arm, eff, val in ns.null_override or []:
        overrides.setdefault(arm, {})[eff] = val
    arms = [base] + [base.null_arm(e, overrides.get(e)) for e in ns.null or []]
    for arm in arms:
        report = run_study(arm, workers=ns.workers)
        name = "study_report.csv" if arm.label == "main" else f"study_report_{arm.label}.csv"
        report.write_csv(out / name)
    return EXIT_OK


COMMANDS = {
    "estimate-sa": cmd_estimate_sa,
    "estimate-ee": cmd_estimate_ee,
    "pool": cmd_pool,
    "simulate": cmd_simulate,
    "gof": cmd_gof,
    "study": cmd_study,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parse(argv)
        out = Path(ns.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(ns, out)
        return COMMANDS[ns.command](ns, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, KeyError) as exc:
        print(f"alaam: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"alaam: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateModel, Diverged, NoConvergedRuns, StudyError) as exc:
        print(f"alaam: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except ALAAMError as exc:
        print(f"alaam: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

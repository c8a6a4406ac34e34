"""Command-line runner: self-play experiments, oracle verification, DP timing.

    rwmplay run CONFIG [--set key=value ...]
    rwmplay verify CONFIG
    rwmplay bench [CONFIG] [--n 10000 100000 ...]

Exit codes: 0 ok, 1 runtime error, 2 config error, 3 verification failure,
4 resource guard.
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import oracle
from .dp_sampler import build_table, exact_partition, approx_partition, \
    multi_resource_partition, multi_resource_sample, partition_sample_many, select_mode
from .duel import DuelSpec, exact_matching_sample, matching_law, mcmc_matching_sample, \
    metropolis_kernel
from .equilibrium import certify, cce_gap, marginal, rounds_for_eps, self_play
from .errors import ConfigError, ResourceGuardError, RwmError, ValidationError
from .learner import LearnerConfig, default_mcmc_steps, regret, regret_curve
from .matroid import field_law, glauber_kernel, glauber_sample_many, glauber_steps, \
    matroid_from_dict
from .matroid_games import CongestionSpec, SecuritySpec
from .resource_games import BlottoSpec, DiceSpec, MultiResourceSpec

log = logging.getLogger("rwmplay")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_VERIFY, EXIT_GUARD = 0, 1, 2, 3, 4

_nonneg_ints = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}
_numbers = {"type": "array", "items": {"type": "number"}}
_matrix = {"type": "array", "items": _numbers}
_matroid = {
    "type": "object",
    "required": ["type"],
    "properties": {"type": {"enum": ["uniform", "partition", "graphic"]}},
}


def _requires(game_type, *fields):
    return {"if": {"properties": {"type": {"const": game_type}}},
            "then": {"required": list(fields)}}


CONFIG_SCHEMA = {
    "type": "object",
    "required": ["game"],
    "properties": {
        "game": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["blotto", "dice", "multi_resource", "congestion",
                                  "security", "duel"]},
                "troops": _nonneg_ints,
                "weights": {"type": "array"},
                "tie_order": _nonneg_ints,
                "zero_sum": {"type": "boolean"},
                "dots": _nonneg_ints,
                "faces": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "counts": {"type": "array", "items": _nonneg_ints},
                "k": {"type": "integer", "minimum": 1},
                "coef": _matrix,
                "field_weights": {"type": "array"},
                "matroid": _matroid,
                "matroids": {"type": "array", "items": _matroid},
                "rewards": _matrix,
                "defender": _matroid,
                "attacker": _matroid,
                "r": _numbers, "zeta": _numbers, "c": _numbers, "rho": _numbers,
                "mu": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
            "allOf": [
                _requires("blotto", "troops", "weights"),
                _requires("dice", "dots", "faces"),
                _requires("multi_resource", "counts", "k"),
                _requires("congestion", "rewards"),
                _requires("security", "defender", "r", "zeta", "c", "rho"),
                _requires("duel", "mu"),
            ],
        },
        "players": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "target_eps": {"type": "number", "exclusiveMinimum": 0},
        "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "C": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "sampler": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["auto", "exact", "approx", "approximate", "mcmc"]},
                "step_multiplier": {"type": "number", "exclusiveMinimum": 0},
                "mcmc_steps": {"type": "integer", "minimum": 1},
            },
        },
        "verify": {
            "type": "object",
            "properties": {
                "rounds": {"type": "integer", "minimum": 0},
                "draws": {"type": "integer", "minimum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "self_play_rounds": {"type": "integer", "minimum": 1},
            },
        },
        "bench": {
            "type": "object",
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "k": {"type": "integer", "minimum": 1},
                "rounds": {"type": "integer", "minimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "repeats": {"type": "integer", "minimum": 1},
                "modes": {"type": "array", "items": {"enum": ["exact", "approx"]}},
            },
        },
        "output_dir": {"type": "string"},
    },
}


# --- configuration -----------------------------------------------------------

def load_config(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        if path.suffix == ".toml":
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e


def apply_overrides(cfg, overrides):
    """Apply ``a.b=value`` overrides; values are parsed as JSON when possible."""
    cfg = json.loads(json.dumps(cfg))
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        try:
            value = json.loads(value)
        except ValueError:
            pass
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {e.message}") from e
    return cfg


def build_game(cfg):
    """Game object from the ``game`` section (and ``players`` where needed)."""
    g = cfg["game"]
    t = g["type"]
    m = cfg.get("players")
    if t == "blotto":
        game = BlottoSpec(g["troops"], g["weights"], g.get("tie_order"), g.get("zero_sum", False))
    elif t == "dice":
        game = DiceSpec(g["dots"], g["faces"])
    elif t == "multi_resource":
        game = MultiResourceSpec(g["counts"], g["k"], g.get("coef"), g.get("field_weights"))
    elif t == "congestion":
        if "matroids" in g:
            mats = [matroid_from_dict(d) for d in g["matroids"]]
        elif "matroid" in g and m:
            mats = [matroid_from_dict(g["matroid"])] * m
        else:
            raise ConfigError("congestion needs 'matroids' or 'matroid' plus 'players'")
        game = CongestionSpec(mats, g["rewards"])
    elif t == "security":
        att = matroid_from_dict(g["attacker"]) if "attacker" in g else None
        game = SecuritySpec(matroid_from_dict(g["defender"]), g["r"], g["zeta"], g["c"],
                            g["rho"], att)
    else:
        game = DuelSpec(g["mu"])
    if m is not None and m != game.n_players:
        raise ConfigError(f"players={m} but the game has {game.n_players} players")
    return game


def learner_configs(cfg, game):
    """Horizon and one learner config per player."""
    sampler = cfg.get("sampler", {})
    delta = cfg.get("delta")
    if "horizon" in cfg:
        T = cfg["horizon"]
    elif "target_eps" in cfg:
        n_log = max(game.N_log(i) for i in range(game.n_players))
        l_max = max(game.L_max(i) for i in range(game.n_players))
        T, d = rounds_for_eps(n_log, l_max, cfg["target_eps"], cfg.get("eta", 0.1),
                              game.n_players, cfg.get("C", 4.0))
        delta = d if delta is None else delta
    else:
        raise ConfigError("config needs 'horizon' or 'target_eps'")
    base = LearnerConfig(horizon=T, beta=cfg.get("beta"), delta=delta,
                         seed=cfg.get("seed", 0), mode=sampler.get("mode", "auto"),
                         step_multiplier=sampler.get("step_multiplier", 4.0),
                         mcmc_steps=sampler.get("mcmc_steps"))
    return T, [base] * game.n_players


def prepare(cfg):
    validate_config(cfg)
    try:
        game = build_game(cfg)
        T, configs = learner_configs(cfg, game)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return game, T, configs


# --- run ---------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, (tuple, list, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def run(cfg):
    """Self-play per the config; writes history, regret CSV and certificate."""
    game, T, configs = prepare(cfg)
    out = Path(cfg.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.get("seed", 0)
    log.info("self-play %s, %d players, T=%d", game.family, game.n_players, T)
    hist = self_play(game, T, configs, seed)

    with open(out / "history.jsonl", "w") as fh:
        for t, (joint, r) in enumerate(zip(hist.actions, hist.rewards)):
            fh.write(json.dumps({"round": t + 1, "actions": _jsonable(joint),
                                 "rewards": r.tolist()}) + "\n")

    curves = [regret_curve(hist.actions, game, i) for i in range(game.n_players)]
    cum = np.cumsum(hist.rewards, axis=0)
    with open(out / "regret.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "player", "reward", "cumulative_reward", "running_regret"])
        for t in range(T):
            for i in range(game.n_players):
                w.writerow([t + 1, i, repr(float(hist.rewards[t, i])), repr(float(cum[t, i])),
                            repr(float(curves[i][t]))])

    marginal_files = None
    if game.n_players == 2 and game.zero_sum:
        marginal_files = []
        for i in range(2):
            name = f"marginal_{i}.json"
            mix = sorted(marginal(hist, i).items())
            (out / name).write_text(json.dumps(
                [{"action": _jsonable(a), "frequency": p} for a, p in mix], indent=1) + "\n")
            marginal_files.append(name)
    cert = certify(hist, game, marginal_files).to_dict()
    cert["config"] = hist.config
    (out / "certificate.json").write_text(json.dumps(_jsonable(cert), indent=2,
                                                     sort_keys=True) + "\n")
    log.info("epsilon=%.4g written to %s", cert["epsilon"], out)
    return cert


# --- verify ------------------------------------------------------------------

def sampling_allowance(n_outcomes, draws):
    """Generous bound on the TV between a law and its empirical estimate."""
    return math.sqrt(n_outcomes / draws)


def _check(name, measured, threshold):
    return {"name": name, "measured": float(measured), "threshold": float(threshold),
            "pass": bool(measured <= threshold)}


def _random_history(game, rounds, rng):
    acts = [oracle.enumerate_actions(game, i) for i in range(game.n_players)]
    return [tuple(a[int(rng.integers(len(a)))] for a in acts) for _ in range(rounds)]


def _empirical_tv(law_actions, law, samples):
    return oracle.tv_distance(law, oracle.empirical_counts(samples, law_actions))


def _verify_resource(game, i, state, history, beta, delta, draws, rng):
    actions, law = oracle.exact_rwm_law(game, i, history, beta)
    allow = sampling_allowance(len(actions), draws)
    out = []
    if isinstance(game, MultiResourceSpec):
        fns = multi_resource_partition(state)
        samples = [multi_resource_sample(state, rng, fns) for _ in range(draws)]
        return [_check(f"multi_resource_tv[{i}]", _empirical_tv(actions, law, samples), allow)]
    exact = exact_partition(state, max_cells=None)
    approx = approx_partition(state, delta)
    worst = 0.0
    for fe, fa in zip(exact.fns, approx.fns):
        m = min(fe.dense_log().size, fa.domain_max + 1)
        ratio = np.exp(fa.dense_log()[:m] - fe.dense_log()[:m])
        worst = max(worst, float(np.abs(ratio - 1).max()))
    out.append(_check(f"partition_sandwich[{i}]", worst, delta))
    samples = partition_sample_many(exact, state, rng, draws)
    out.append(_check(f"dp_tv_exact[{i}]", _empirical_tv(actions, law, samples), allow))
    table = approx_partition(state, min(2 * delta / state.k, 0.5))
    samples = partition_sample_many(table, state, rng, draws)
    out.append(_check(f"dp_tv_approx[{i}]", _empirical_tv(actions, law, samples),
                      delta + allow))
    return out


def _verify_matroid(game, i, state, history, beta, delta, draws, step_multiplier, rng):
    M = game.matroid(i)
    fld = state.field(beta)
    actions, law = oracle.exact_rwm_law(game, i, history, beta)
    bases, flaw = field_law(M, fld)
    index = {oracle.as_key(b): j for j, b in enumerate(bases)}
    aligned = np.array([flaw[index[oracle.as_key(sorted(a))]] for a in actions])
    out = [_check(f"field_law_agreement[{i}]", float(np.abs(aligned - law).max()), 1e-12)]
    steps = glauber_steps(M.rank, M.n, M.rank * fld.log_range(), delta, step_multiplier)
    samples = glauber_sample_many(M, fld, steps, rng, draws)
    out.append(_check(f"glauber_tv[{i}]", _empirical_tv(bases, flaw, samples),
                      delta + sampling_allowance(len(bases), draws)))
    _, K = glauber_kernel(M, fld)
    flow = flaw[:, None] * K
    out.append(_check(f"glauber_detailed_balance[{i}]", float(np.abs(flow - flow.T).max()),
                      1e-9))
    return out


def _verify_duel(game, i, state, delta, draws, mcmc_steps, step_multiplier, rng):
    W = state.log_w
    perms, law = matching_law(W)
    allow = sampling_allowance(len(perms), draws)
    out = []
    samples = exact_matching_sample(W, rng, size=draws)
    out.append(_check(f"exact_matching_tv[{i}]", _empirical_tv(perms, law, samples), allow))
    steps = mcmc_steps or default_mcmc_steps(game.n, delta, step_multiplier)
    samples = mcmc_matching_sample(W, steps, rng, replicas=draws)
    out.append(_check(f"mcmc_matching_tv[{i}]", _empirical_tv(perms, law, samples),
                      delta + allow))
    if game.n <= 6:
        _, K = metropolis_kernel(W)
        flow = law[:, None] * K
        out.append(_check(f"metropolis_detailed_balance[{i}]",
                          float(np.abs(flow - flow.T).max()), 1e-9))
    return out


def verify(cfg):
    """Oracle checks on a desk-scale instance; returns the list of checks."""
    game, T, configs = prepare(cfg)
    vc = cfg.get("verify", {})
    rng = np.random.default_rng(cfg.get("seed", 0))
    draws = vc.get("draws", 20000)
    delta = vc.get("delta", cfg.get("delta", 0.05))
    sampler = cfg.get("sampler", {})
    step_multiplier = sampler.get("step_multiplier", 4.0)
    history = _random_history(game, vc.get("rounds", 3), rng)
    checks = []
    for i in range(game.n_players):
        beta = configs[i].resolved(game, i).beta
        state = oracle.aggregate(game, i, history, beta)
        if isinstance(game, (BlottoSpec, DiceSpec, MultiResourceSpec)):
            checks += _verify_resource(game, i, state, history, beta, delta, draws, rng)
        elif isinstance(game, (CongestionSpec, SecuritySpec)):
            checks += _verify_matroid(game, i, state, history, beta, delta, draws,
                                      step_multiplier, rng)
        else:
            checks += _verify_duel(game, i, state, delta, draws, sampler.get("mcmc_steps"),
                                   step_multiplier, rng)
        if history:
            _, fast = oracle.best_response(game, i, history)
            _, brute = oracle.brute_force_best_response(game, i, history)
            checks.append(_check(f"best_response_oracle[{i}]", abs(fast - brute), 1e-9))

    sp_T = vc.get("self_play_rounds", 50)
    sp_configs = [LearnerConfig(horizon=sp_T, seed=c.seed, mode=c.mode,
                                step_multiplier=c.step_multiplier, mcmc_steps=c.mcmc_steps)
                  for c in configs]
    hist = self_play(game, sp_T, sp_configs, cfg.get("seed", 0))
    for i in range(game.n_players):
        diff = abs(cce_gap(hist, game, i) - regret(hist.actions, game, i) / sp_T)
        checks.append(_check(f"gap_identity[{i}]", diff, 1e-12))
    return checks


# --- bench -------------------------------------------------------------------

def random_composition(n, k, rng):
    """Uniformly random split of ``n`` items into ``k`` ordered parts."""
    bars = np.sort(rng.choice(n + k - 1, size=k - 1, replace=False))
    return tuple(int(v) for v in np.diff(np.concatenate(([-1], bars, [n + k - 1]))) - 1)


def bench_profile(n, k, rounds, beta, rng):
    """Blotto loss profile of a player facing ``rounds`` uniformly random opponents."""
    game = BlottoSpec([n, n], np.ones(k))
    profile = game.make_profile(0, beta)
    for _ in range(rounds):
        opp = random_composition(n, k, rng)
        game.observe(profile, ((n,) + (0,) * (k - 1), opp), 0)
    return profile


def _table_pieces(table):
    return int(sum(getattr(f, "n_pieces", None) or f.dense_log().size for f in table.fns))


def bench(ns, k=3, rounds=200, delta=0.1, beta=0.9, repeats=3, modes=("approx", "exact"),
          seed=0):
    """Time table construction per ``n`` and mode; min over ``repeats``."""
    rng = np.random.default_rng(seed)
    warm = bench_profile(50, k, 5, beta, rng)
    for mode in modes:
        build_table(warm, delta, mode, max_cells=None)
    rows = []
    for n in ns:
        profile = bench_profile(n, k, rounds, beta, rng)
        log.info("n=%d: auto selects %s", n, select_mode(profile, delta))
        for mode in modes:
            best = math.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                table = build_table(profile, delta, mode, max_cells=None)
                best = min(best, time.perf_counter() - t0)
            rows.append({"n": n, "mode": mode, "seconds": best, "pieces": _table_pieces(table)})
            log.info("n=%d mode=%s %.3fs", n, mode, best)
    return rows


# --- entry point -------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="rwmplay", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="self-play and write history, regret and certificate")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--output-dir")

    v = sub.add_parser("verify", help="run the oracle checks on a desk instance")
    v.add_argument("config")
    v.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    v.add_argument("--report", help="write the JSON report here as well")

    b = sub.add_parser("bench", help="time exact vs approximate partition tables")
    b.add_argument("config", nargs="?")
    b.add_argument("--n", type=int, nargs="+")
    b.add_argument("--k", type=int)
    b.add_argument("--rounds", type=int)
    b.add_argument("--delta", type=float)
    b.add_argument("--beta", type=float)
    b.add_argument("--repeats", type=int)
    b.add_argument("--modes", nargs="+", choices=["exact", "approx"])
    b.add_argument("--out", default="bench.csv")
    return p


def _main(args):
    if args.command == "bench":
        cfg = load_config(args.config) if args.config else {"game": {"type": "blotto"}}
        bc = dict(cfg.get("bench", {}))
        for key in ("n", "k", "rounds", "delta", "beta", "repeats", "modes"):
            if getattr(args, key) is not None:
                bc[key] = getattr(args, key)
        try:
            jsonschema.validate(bc, CONFIG_SCHEMA["properties"]["bench"])
        except jsonschema.ValidationError as e:
            raise ConfigError(f"bench schema error: {e.message}") from e
        rows = bench(bc.get("n", [10**4, 10**5, 10**6]), bc.get("k", 3), bc.get("rounds", 200),
                     bc.get("delta", 0.1), bc.get("beta", 0.9), bc.get("repeats", 3),
                     tuple(bc.get("modes", ("approx", "exact"))), cfg.get("seed", 0))
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["n", "mode", "seconds", "pieces"])
            w.writeheader()
            w.writerows(rows)
        print(f"wrote {len(rows)} rows to {args.out}")
        return EXIT_OK

    cfg = apply_overrides(load_config(args.config), args.set)
    if args.command == "run":
        if args.output_dir:
            cfg["output_dir"] = args.output_dir
        cert = run(cfg)
        print(json.dumps({"epsilon": cert["epsilon"], "T": cert["T"]}))
        return EXIT_OK

    checks = verify(cfg)
    ok = all(c["pass"] for c in checks)
    report = json.dumps({"checks": checks, "pass": ok}, indent=2)
    if args.report:
        Path(args.report).write_text(report + "\n")
    print(report)
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _main(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as e:
        print(f"resource guard: {e}", file=sys.stderr)
        return EXIT_GUARD
    except ValidationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except RwmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

"""Monte-Carlo experiment runner.

An experiment is described by a YAML file (see ``configs/``).  For every grid
point it estimates type-I error on the null instance (``q = p``) and type-II
error on a far alternative, or searches for the smallest sample size that
reaches a target power.  Each trial draws its randomness from
``Seed(master_seed, (grid_index, hypothesis, trial))`` so results do not depend
on how trials are spread over worker processes.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .ak_tester import (
    CONSTANT_PRESETS,
    TesterConstants,
    parse_class,
    preset_k,
    test_identity_ak,
    test_uniformity_ak,
)
from .distributions import DistributionError, Pmf, ak_distance, uniform
from .l2 import test_uniformity_l2, test_uniformity_l2_amplified
from .samplers import (
    PmfSource,
    Seed,
    as_rng,
    cancellation_instance,
    gen_kflat,
    gen_logconcave,
    gen_mhr,
    gen_mixture,
    gen_piecewise_poly,
    gen_tmodal,
    perturb_far_ak,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "SearchResult",
    "load_config",
    "parse_config",
    "generate_class",
    "cancellation_far",
    "run_experiment",
    "find_min_samples",
    "estimate_rates",
    "binomial_ci",
    "loglog_slope",
    "default_threads",
]

SCENARIOS = ("uniformity-l2", "uniformity-ak", "identity-ak", "check")
ALTERNATIVES = ("perturb-far", "cancellation")
SWEEP_PARAMS = ("k", "n", "m", "eps", "base")
CRITERIA = ("max_type_i", "max_type_ii", "min_accept_rate", "min_reject_rate", "slope_range", "max_runtime_s")
THREADS_ENV = "AKT_THREADS"
NULL, ALT = 0, 1


class ConfigError(ValueError):
    """Invalid experiment configuration; ``fields`` lists every offending key."""

    def __init__(self, problems: dict):
        self.fields = sorted(problems)
        self.problems = problems
        super().__init__("invalid config: " + "; ".join(f"{k}: {v}" for k, v in sorted(problems.items())))


@dataclass
class ExperimentConfig:
    name: str
    scenario: str
    trials: int
    master_seed: int
    instance: dict
    tester: dict
    sweep: Optional[dict] = None
    search: Optional[dict] = None
    check: Optional[dict] = None
    criteria: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "scenario": self.scenario,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "instance": self.instance,
            "tester": self.tester,
            "sweep": self.sweep,
            "search": self.search,
            "check": self.check,
            "criteria": self.criteria,
        }

    def constants(self) -> TesterConstants:
        return _constants(self.tester)


def _constants(tester: dict) -> TesterConstants:
    """``tester.constants`` is a preset name or a mapping, optionally with a ``preset`` key."""
    chosen = tester.get("constants") or {}
    if isinstance(chosen, str):
        chosen = {"preset": chosen}
    chosen = dict(chosen)
    base = CONSTANT_PRESETS[chosen.pop("preset", "default")]
    return base.with_overrides(**chosen)


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping; every problem found is reported at once."""
    if not isinstance(raw, dict):
        raise ConfigError({"<root>": "config must be a mapping"})
    bad: dict = {}
    known = {"name", "scenario", "trials", "master_seed", "instance", "tester", "sweep", "search", "check", "criteria"}
    for key in set(raw) - known:
        bad[key] = "unknown key"
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        bad["scenario"] = f"must be one of {', '.join(SCENARIOS)}"
    trials = raw.get("trials", 2000)
    if not _is_int(trials) or trials < 1:
        bad["trials"] = "must be an integer >= 1"
    seed = raw.get("master_seed", 0)
    if not _is_int(seed) or not (0 <= seed < 2**64):
        bad["master_seed"] = "must be an unsigned 64-bit integer"
    inst = dict(raw.get("instance") or {})
    tester = dict(raw.get("tester") or {})
    check = raw.get("check")
    criteria = dict(raw.get("criteria") or {})
    for key in set(criteria) - set(CRITERIA):
        bad[f"criteria.{key}"] = "unknown criterion"
    if "slope_range" in criteria:
        sr = criteria["slope_range"]
        if not (isinstance(sr, (list, tuple)) and len(sr) == 2 and all(map(_is_num, sr)) and sr[0] <= sr[1]):
            bad["criteria.slope_range"] = "must be [low, high]"

    if scenario == "check":
        from .checks import CHECKS

        if not isinstance(check, dict) or check.get("name") not in CHECKS:
            bad["check.name"] = f"must be one of {', '.join(sorted(CHECKS))}"
        elif not isinstance(check.get("params", {}), dict):
            bad["check.params"] = "must be a mapping"
    elif scenario in SCENARIOS:
        _validate_testing(inst, tester, raw, bad)

    sweep = raw.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or sweep.get("param") not in SWEEP_PARAMS:
            bad["sweep.param"] = f"must be one of {', '.join(SWEEP_PARAMS)}"
        vals = sweep.get("values") if isinstance(sweep, dict) else None
        if not isinstance(vals, list) or not vals:
            bad["sweep.values"] = "must be a non-empty list"
        elif sweep.get("param") == "base":
            for v in vals:
                try:
                    v == "uniform" or parse_class(v)
                except ValueError as exc:
                    bad["sweep.values"] = str(exc)
        elif not all(map(_is_num, vals)):
            bad["sweep.values"] = "must be numbers"
        if scenario == "check":
            bad["sweep"] = "not supported for checks"
    search = raw.get("search")
    if search is not None:
        if not isinstance(search, dict):
            bad["search"] = "must be a mapping"
        else:
            tp = search.get("target_power")
            if not _is_num(tp) or not (0.5 < tp < 1):
                bad["search.target_power"] = "must lie in (0.5, 1)"
            if not _is_num(search.get("ratio", 1.25)) or search.get("ratio", 1.25) <= 1:
                bad["search.ratio"] = "must exceed 1"
            lo, hi = search.get("lo", 1.0), search.get("hi", 64.0)
            if not (_is_num(lo) and _is_num(hi) and 0 < lo < hi):
                bad["search.lo"] = "need 0 < lo < hi"
            t = search.get("trials", None)
            if t is not None and (not _is_int(t) or t < 1):
                bad["search.trials"] = "must be an integer >= 1"
            if not inst.get("alternative"):
                bad["instance.alternative"] = "a search needs an alternative"
    if bad:
        raise ConfigError(bad)
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        scenario=scenario,
        trials=int(trials),
        master_seed=int(seed),
        instance=inst,
        tester=tester,
        sweep=sweep,
        search=search,
        check=check,
        criteria=criteria,
    )


def _validate_testing(inst: dict, tester: dict, raw: dict, bad: dict) -> None:
    n = inst.get("n")
    swept = (raw.get("sweep") or {}).get("param") if isinstance(raw.get("sweep"), dict) else None
    if not (_is_int(n) and n >= 2) and swept != "n":
        bad["instance.n"] = "must be an integer >= 2"
    null = inst.get("base", "uniform")
    if swept == "base":
        null = "<swept>"
    elif null != "uniform":
        try:
            parse_class(null)
        except ValueError as exc:
            bad["instance.base"] = str(exc)
    alt = inst.get("alternative")
    if alt is not None:
        if not isinstance(alt, dict) or alt.get("type") not in ALTERNATIVES:
            bad["instance.alternative.type"] = f"must be one of {', '.join(ALTERNATIVES)}"
        else:
            if null != "uniform":
                bad["instance.alternative"] = "far alternatives are built around a uniform null"
            if alt["type"] == "perturb-far" and not (_is_num(alt.get("eps")) and 0 < alt["eps"] <= 1):
                bad["instance.alternative.eps"] = "must lie in (0, 1]"
            if alt["type"] == "cancellation" and not (_is_num(alt.get("ak")) and 0 < alt["ak"] <= 1):
                bad["instance.alternative.ak"] = "must lie in (0, 1]"
            if not (_is_int(alt.get("k")) and alt["k"] >= 1) and swept != "k":
                bad["instance.alternative.k"] = "must be a positive integer"
    for key in set(inst) - {"n", "base", "alternative"}:
        bad[f"instance.{key}"] = "unknown key"
    eps = tester.get("eps")
    if not (_is_num(eps) and 0 < eps < 1) and swept != "eps":
        bad["tester.eps"] = "must lie in (0, 1)"
    delta = tester.get("delta", 1 / 3)
    if not (_is_num(delta) and 0 < delta <= 1 / 3 + 1e-12):
        bad["tester.delta"] = "must lie in (0, 1/3]"
    if raw.get("scenario") != "uniformity-l2":
        k = tester.get("k")
        if k == "preset":
            if null == "uniform":
                bad["tester.k"] = "preset k needs a class null"
        elif not (_is_int(k) and k >= 2) and swept != "k":
            bad["tester.k"] = "must be an integer >= 2 or 'preset'"
    m = tester.get("m")
    if m is not None and not (_is_int(m) and m >= 1):
        bad["tester.m"] = "must be a positive integer"
    consts = tester.get("constants") or {}
    if isinstance(consts, str):
        consts = {"preset": consts}
    if not isinstance(consts, dict):
        bad["tester.constants"] = "must be a preset name or a mapping"
        consts = {}
    fields_ok = set(TesterConstants().as_dict())
    for key, v in consts.items():
        if key == "preset":
            if v not in CONSTANT_PRESETS:
                bad["tester.constants.preset"] = f"must be one of {', '.join(CONSTANT_PRESETS)}"
        elif key not in fields_ok:
            bad[f"tester.constants.{key}"] = "unknown constant"
        elif not _is_num(v) or v <= 0:
            bad[f"tester.constants.{key}"] = "must be positive"
    for key in set(tester) - {"eps", "k", "delta", "m", "constants", "c_l2"}:
        bad[f"tester.{key}"] = "unknown key"


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError({"<file>": f"YAML parse error: {exc}"}) from None
    return parse_config(raw)


# --------------------------------------------------------------------------
# instances


def generate_class(descriptor, n: int, seed) -> Pmf:
    """Random member of a named class, e.g. ``t-flat:5`` or ``mixture-t-modal:3,1``."""
    d = parse_class(descriptor)
    pr = d.params
    rng = as_rng(seed)
    base = {
        "t-flat": lambda r: gen_kflat(n, pr[0], r),
        "piecewise-poly": lambda r: gen_piecewise_poly(n, pr[0], pr[1], r),
        "log-concave": lambda r: gen_logconcave(n, r),
        "t-modal": lambda r: gen_tmodal(n, pr[-1], r),
        "mhr": lambda r: gen_mhr(n, r),
    }
    if not d.name.startswith("mixture-"):
        return base[d.name](rng)
    make = base[d.name[len("mixture-") :]]
    weights = rng.dirichlet(np.ones(pr[0]))
    return gen_mixture([make] * pr[0], weights.tolist(), int(rng.integers(0, 2**63)))


def cancellation_far(n: int, k: int, ak: float, seed) -> Pmf:
    """Cancellation instance scaled so that its A_k distance to uniform is ``ak``.

    The reduced distribution over the ``k`` coarse intervals stays exactly
    uniform.  The distance is linear in the amplitude, so one unit-amplitude
    evaluation fixes the scale.
    """
    rng = as_rng(seed)
    state = rng.bit_generator.state
    unit = cancellation_instance(n, k, 1.0, rng)
    d1 = float(ak_distance(unit, uniform(n), k).value)
    amp = ak / d1
    if amp > 1:
        raise DistributionError(f"A_k distance {ak} is out of reach for n={n}, k={k}")
    rng.bit_generator.state = state
    return cancellation_instance(n, k, amp, rng)


# --------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class _Point:
    """One fully resolved grid point, cheap to ship to worker processes."""

    scenario: str
    n: int
    k: Optional[int]
    eps: float
    delta: float
    m: Optional[int]
    constants: dict
    c_l2: float
    base: str
    alternative: Optional[dict]


def _resolve(cfg: ExperimentConfig, value=None) -> _Point:
    inst = copy.deepcopy(cfg.instance)
    tester = copy.deepcopy(cfg.tester)
    alt = inst.get("alternative")
    if cfg.sweep is not None and value is not None:
        param = cfg.sweep["param"]
        if param == "n":
            inst["n"] = int(value)
        elif param == "m":
            tester["m"] = int(value)
        elif param == "k":
            tester["k"] = int(value)
            if alt is not None:
                alt["k"] = int(value)
        elif param == "base":
            inst["base"] = str(value)
        elif param == "eps":
            tester["eps"] = float(value)
            if alt is not None and alt["type"] == "perturb-far":
                alt["eps"] = float(value)
    consts = _constants(tester)
    null = inst.get("base", "uniform")
    k = tester.get("k")
    if k == "preset":
        k = preset_k(null, inst["n"], tester["eps"], consts)
    return _Point(
        scenario=cfg.scenario,
        n=int(inst["n"]),
        k=None if k is None else int(k),
        eps=float(tester["eps"]),
        delta=float(tester.get("delta", 1 / 3)),
        m=tester.get("m"),
        constants=consts.as_dict(),
        c_l2=float(tester.get("c_l2", consts.c_l2)),
        base=null,
        alternative=alt,
    )


def _instance(pt: _Point, hyp: int, seed: Seed) -> Pmf:
    if hyp == NULL or pt.alternative is None:
        return uniform(pt.n) if pt.base == "uniform" else generate_class(pt.base, pt.n, seed)
    alt = pt.alternative
    if alt["type"] == "perturb-far":
        return perturb_far_ak(uniform(pt.n), int(alt["k"]), float(alt["eps"]), seed)
    return cancellation_far(pt.n, int(alt["k"]), float(alt["ak"]), seed)


def _one_trial(pt: _Point, hyp: int, seed: Seed, m: Optional[int]) -> tuple:
    p = _instance(pt, NULL, seed.child(0))
    q = p if hyp == NULL else _instance(pt, ALT, seed.child(0))
    source = PmfSource(q, seed.child(1))
    rng = seed.child(2).rng()
    consts = TesterConstants(**pt.constants)
    if pt.scenario == "uniformity-l2":
        if pt.delta < 1 / 3 - 1e-12:
            out = test_uniformity_l2_amplified(source, pt.n, pt.eps, pt.delta, rng, c_l2=pt.c_l2, m=m)
        else:
            out = test_uniformity_l2(source, pt.n, pt.eps, rng, c_l2=pt.c_l2, m=m)
    elif pt.scenario == "uniformity-ak":
        out = test_uniformity_ak(source, pt.n, pt.k, pt.eps, rng, constants=consts, m=m)
    else:
        delta = pt.delta if pt.delta < 1 / 3 - 1e-12 else 1 / 3
        out = test_identity_ak(source, p, pt.k, pt.eps, rng, delta=delta, constants=consts, m=m)
    return bool(out.rejected), int(source.drawn)


def _run_chunk(pt: _Point, master: int, grid_idx: int, hyp: int, start: int, stop: int, m) -> list:
    return [_one_trial(pt, hyp, Seed(master, (grid_idx, hyp, t)), m) for t in range(start, stop)]


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def binomial_ci(rate: float, trials: int) -> float:
    return 1.96 * math.sqrt(rate * (1 - rate) / trials)


@dataclass
class _Rates:
    hyp: int
    trials: int
    rejects: int
    mean_samples: float

    @property
    def reject_rate(self) -> float:
        return self.rejects / self.trials


def estimate_rates(
    pt: _Point, master: int, grid_idx: int, hyp: int, trials: int, m=None, executor=None, threads: int = 1
) -> _Rates:
    """Run ``trials`` independent trials of one hypothesis and tally rejections."""
    m = pt.m if m is None else m
    if executor is None or threads <= 1:
        results = _run_chunk(pt, master, grid_idx, hyp, 0, trials, m)
    else:
        size = max(1, math.ceil(trials / (4 * threads)))
        futs = [
            executor.submit(_run_chunk, pt, master, grid_idx, hyp, s, min(trials, s + size), m)
            for s in range(0, trials, size)
        ]
        results = [r for f in futs for r in f.result()]
    if len(results) != trials:
        raise RuntimeError(f"trial tally {len(results)} != configured {trials}")
    rejects = sum(r for r, _ in results)
    return _Rates(hyp, trials, rejects, sum(s for _, s in results) / trials)


# --------------------------------------------------------------------------
# sample-size search


@dataclass
class SearchResult:
    min_samples: Optional[int]
    target_power: float
    grid: list
    frontier: list  # probes in the order they ran: {m, power, type_i, ...}

    @property
    def found(self) -> bool:
        return self.min_samples is not None


def _search_grid(pt: _Point, search: dict) -> list:
    ratio = float(search.get("ratio", 1.25))
    size = pt.n if pt.scenario == "uniformity-l2" else pt.k
    base = math.sqrt(size) / pt.eps**2
    lo, hi = float(search.get("lo", 1.0)) * base, float(search.get("hi", 64.0)) * base
    grid, x = [], lo
    while x <= hi * (1 + 1e-12):
        v = max(1, math.ceil(x))
        if not grid or v > grid[-1]:
            grid.append(v)
        x *= ratio
    return grid


def find_min_samples(
    cfg: ExperimentConfig,
    target_power: Optional[float] = None,
    *,
    value=None,
    grid_idx: int = 0,
    executor=None,
    threads: int = 1,
) -> SearchResult:
    """Smallest ``m`` on a geometric grid with power >= target and type-I <= 1/3 + CI.

    Bisects over grid indices, so power is assumed monotone in ``m``.  Each
    probe runs the alternative first and only spends null trials when the
    power target is met.
    """
    search = dict(cfg.search or {})
    target = float(target_power if target_power is not None else search.get("target_power", 2 / 3))
    if not (0.5 < target < 1):
        raise ValueError("target power must lie in (0.5, 1)")
    pt = _resolve(cfg, value)
    trials = int(search.get("trials") or cfg.trials)
    grid = _search_grid(pt, search)
    frontier: list = []
    cache: dict = {}

    def probe(i: int) -> bool:
        if i in cache:
            return cache[i]
        m = grid[i]
        # probe streams are keyed by grid index so repeated searches agree
        stream = grid_idx * 1000 + i
        alt = estimate_rates(pt, cfg.master_seed, stream, ALT, trials, m, executor, threads)
        row = {"m": m, "power": alt.reject_rate, "power_ci": binomial_ci(alt.reject_rate, trials)}
        ok = alt.reject_rate >= target
        if ok:
            null = estimate_rates(pt, cfg.master_seed, stream, NULL, trials, m, executor, threads)
            ci = binomial_ci(null.reject_rate, trials)
            row.update(type_i=null.reject_rate, type_i_ci=ci)
            ok = null.reject_rate <= 1 / 3 + ci
        row["passed"] = ok
        frontier.append(row)
        cache[i] = ok
        return ok

    if not probe(len(grid) - 1):
        return SearchResult(None, target, grid, frontier)
    lo, hi = -1, len(grid) - 1  # grid[hi] passes, everything <= lo is known or assumed to fail
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return SearchResult(grid[hi], target, grid, frontier)


def loglog_slope(xs, ys) -> float:
    x, y = np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------------------
# reports


TIMING_KEYS = ("wall_clock_s",)
CSV_FIELDS = [
    "grid_index",
    "param",
    "value",
    "n",
    "k",
    "eps",
    "m",
    "trials",
    "type_i",
    "type_i_ci",
    "type_ii",
    "type_ii_ci",
    "mean_samples_null",
    "mean_samples_alt",
    "min_samples",
    "wall_clock_s",
]


@dataclass
class ExperimentReport:
    config: dict
    constants: dict
    version: str
    rows: list
    summary: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.criteria)

    def payload(self, timing: bool = True) -> dict:
        out = {
            "config": self.config,
            "constants": self.constants,
            "version": self.version,
            "rows": self.rows,
            "summary": self.summary,
            "criteria": self.criteria,
            "passed": self.passed,
            "wall_clock_s": self.wall_clock_s,
        }
        return out if timing else _strip_timing(out)

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(_jsonable(self.payload(timing)), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_FIELDS})
        return buf.getvalue()

    def write(self, out_dir) -> tuple:
        os.makedirs(out_dir, exist_ok=True)
        stem = os.path.join(out_dir, self.config.get("name", "experiment"))
        with open(stem + ".csv", "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())
        with open(stem + ".json", "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")
        return stem + ".csv", stem + ".json"

    def criterion_lines(self) -> list:
        return [
            f"{'PASS' if c['passed'] else 'FAIL'} {c['criterion']}: observed {_fmt(c['observed'])}, bound {_fmt(c['bound'])}"
            for c in self.criteria
        ]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _grid(cfg: ExperimentConfig) -> list:
    if cfg.sweep is None:
        return [None]
    return list(cfg.sweep["values"])


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    """Run every grid point of ``cfg`` and evaluate its criteria."""
    threads = default_threads() if threads is None else max(1, int(threads))
    t_start = time.perf_counter()
    if cfg.scenario == "check":
        return _run_check(cfg, t_start)
    executor = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    rows = []
    try:
        for gi, value in enumerate(_grid(cfg)):
            t0 = time.perf_counter()
            pt = _resolve(cfg, value)
            row = {
                "grid_index": gi,
                "param": cfg.sweep["param"] if cfg.sweep else None,
                "value": value,
                "n": pt.n,
                "k": pt.k,
                "eps": pt.eps,
                "m": pt.m,
                "trials": cfg.trials,
            }
            if cfg.search is not None:
                res = find_min_samples(cfg, value=value, grid_idx=gi, executor=executor, threads=threads)
                row.update(min_samples=res.min_samples, frontier=res.frontier, target_power=res.target_power)
                row["trials"] = int(cfg.search.get("trials") or cfg.trials)
            else:
                null = estimate_rates(pt, cfg.master_seed, gi, NULL, cfg.trials, None, executor, threads)
                row.update(
                    type_i=null.reject_rate,
                    type_i_ci=binomial_ci(null.reject_rate, cfg.trials),
                    mean_samples_null=null.mean_samples,
                    verdicts_null={"reject": null.rejects, "accept": cfg.trials - null.rejects},
                )
                if pt.alternative is not None:
                    alt = estimate_rates(pt, cfg.master_seed, gi, ALT, cfg.trials, None, executor, threads)
                    t2 = 1 - alt.reject_rate
                    row.update(
                        type_ii=t2,
                        type_ii_ci=binomial_ci(t2, cfg.trials),
                        mean_samples_alt=alt.mean_samples,
                        verdicts_alt={"reject": alt.rejects, "accept": cfg.trials - alt.rejects},
                    )
            row["wall_clock_s"] = time.perf_counter() - t0
            rows.append(row)
    finally:
        if executor is not None:
            executor.shutdown()
    summary = {}
    if cfg.search is not None and cfg.sweep is not None:
        found = [(r["value"], r["min_samples"]) for r in rows if r.get("min_samples")]
        summary["all_found"] = len(found) == len(rows)
        if len(found) >= 2:
            summary["slope"] = loglog_slope(*zip(*found))
            summary["slope_against"] = cfg.sweep["param"]
    report = ExperimentReport(
        config=cfg.to_dict(),
        constants=cfg.constants().as_dict(),
        version=__version__,
        rows=rows,
        summary=summary,
    )
    report.wall_clock_s = time.perf_counter() - t_start
    report.criteria = _evaluate(cfg, report)
    return report


def _run_check(cfg: ExperimentConfig, t_start: float) -> ExperimentReport:
    from .checks import run_check

    params = dict(cfg.check.get("params") or {})
    res = run_check(cfg.check["name"], cfg.master_seed, **params)
    row = {"grid_index": 0, "trials": res["count"], **res, "wall_clock_s": time.perf_counter() - t_start}
    report = ExperimentReport(cfg.to_dict(), cfg.constants().as_dict(), __version__, [row], {})
    report.wall_clock_s = time.perf_counter() - t_start
    report.criteria = [
        {
            "criterion": f"check:{res['name']}",
            "observed": res["violations"],
            "bound": 0,
            "passed": bool(res["passed"]),
        }
    ] + _evaluate(cfg, report)
    return report


def _evaluate(cfg: ExperimentConfig, report: ExperimentReport) -> list:
    out = []
    crit = cfg.criteria

    def add(name, observed, bound, ok):
        out.append({"criterion": name, "observed": observed, "bound": bound, "passed": bool(ok)})

    for r in report.rows:
        tag = "" if r.get("param") is None else f"[{r['param']}={r['value']}]"
        if "max_type_i" in crit and r.get("type_i") is not None:
            add("type_i" + tag, r["type_i"], crit["max_type_i"], r["type_i"] <= crit["max_type_i"])
        if "min_accept_rate" in crit and r.get("type_i") is not None:
            acc = 1 - r["type_i"]
            add("accept_rate" + tag, acc, crit["min_accept_rate"], acc >= crit["min_accept_rate"])
        if "max_type_ii" in crit and r.get("type_ii") is not None:
            add("type_ii" + tag, r["type_ii"], crit["max_type_ii"], r["type_ii"] <= crit["max_type_ii"])
        if "min_reject_rate" in crit and r.get("type_ii") is not None:
            rej = 1 - r["type_ii"]
            add("reject_rate" + tag, rej, crit["min_reject_rate"], rej >= crit["min_reject_rate"])
    if "slope_range" in crit:
        lo, hi = crit["slope_range"]
        slope = report.summary.get("slope")
        ok = slope is not None and report.summary.get("all_found", False) and lo <= slope <= hi
        add("loglog_slope", slope, [lo, hi], ok)
    if "max_runtime_s" in crit:
        add("runtime_s", report.wall_clock_s, crit["max_runtime_s"], report.wall_clock_s <= crit["max_runtime_s"])
    return out


"""Batch driver: experiment configs in, CSV and JSON reports out.

Every option can also live in a flat key=value config file (``--config``);
a flag given on the command line wins over the file.  Unknown keys in the
file are rejected before any computation starts.  Exit codes follow the
error taxonomy: 2 bad configuration, 3 precision or horizon ceiling,
4 internal consistency trap.
"""

import io
import json
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, is_dataclass
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import acceptance
from .birkhoff import (CoboundaryWitness, birkhoff_sums,
                       doubling_coboundary_obstruction, favourite_f,
                       oren_analysis, rational_coboundary)
from .clt_lab import (CltExperiment, empirical_distribution, kac_sigma2,
                      ln_scale_experiment, range_growth_probe, thread_cap,
                      w_set_report)
from .continued_fractions import (cf_expand, cf_from_quotients,
                                  discrepancy_qk_b, golden_alpha, ostrowski)
from .entire_products import (EntireProductSpec, ExpTypeSymbol, PolyVector,
                              decay_csv, noncommuting_product,
                              phiD_classifier)
from .errors import (ConfigError, ErgolinError, InternalConsistencyError,
                     PrecisionError)
from .hardy_products import (BUILTIN_PAIRS, builtin_pair, classify,
                             nonuniversality_certificate, norm_trajectory,
                             unimodular_pair)
from .torus_dynamics import BitStream, Doubling, Interval, Rotation

_SCHEMA = frozenset({
    "alpha", "b", "a1", "a2", "transformation", "exact", "uncertainty",
    "omega", "omega_seed", "omega_count", "pattern", "pattern_seed",
    "n", "nn", "m", "samples", "seed", "depth", "k", "k_max", "k_bound",
    "q", "kk", "pair", "lam", "s", "m1", "m2", "radius", "normalization",
    "k_index", "checkpoints", "count", "c_grid", "beta", "max_lag",
    "coeffs", "phi1", "phi2", "only", "out",
})

_GOLDEN_BITS = 320


def _load_config(path) -> dict:
    vals = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in _SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        vals[key] = val.strip()
    return vals


class ExperimentConfig:
    """Config-file values merged with command-line overrides, typed on read."""

    def __init__(self, config_path=None, **overrides):
        self.values = _load_config(config_path) if config_path else {}
        for key, val in overrides.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            if val is not None:
                self.values[key] = val

    def has(self, key: str) -> bool:
        return key in self.values

    def raw(self, key: str, default=None):
        return self.values.get(key, default)

    def _req(self, key: str):
        if key not in self.values:
            raise ConfigError(f"missing required config key {key!r}")
        return self.values[key]

    def integer(self, key: str, default=None) -> int:
        val = self._req(key) if default is None else self.raw(key, default)
        try:
            return int(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be an integer, got {val!r}")

    def number(self, key: str, default=None) -> float:
        val = self._req(key) if default is None else self.raw(key, default)
        try:
            return float(Fraction(str(val)))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{key} must be a number, got {val!r}")

    def fraction(self, key: str, default=None) -> Fraction:
        val = self.raw(key)
        if val is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            val = default
        return _parse_fraction(val, key)

    def flag(self, key: str, default: bool = False) -> bool:
        val = self.raw(key)
        if val is None:
            return default
        if isinstance(val, bool):
            return val
        text = str(val).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} must be boolean, got {val!r}")

    def text(self, key: str, default=None) -> str:
        val = self.raw(key, default)
        if val is None:
            raise ConfigError(f"missing required config key {key!r}")
        return str(val)

    def int_list(self, key: str, default=None) -> list:
        val = self.raw(key)
        if val is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return list(default)
        try:
            return [int(part) for part in str(val).split(",") if part.strip()]
        except ValueError:
            raise ConfigError(f"{key} must be comma-separated integers")

    def float_list(self, key: str, default=None) -> list:
        val = self.raw(key)
        if val is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return list(default)
        try:
            return [float(part) for part in str(val).split(",")
                    if part.strip()]
        except ValueError:
            raise ConfigError(f"{key} must be comma-separated numbers")


def _parse_fraction(val, key: str) -> Fraction:
    if isinstance(val, Fraction):
        return val
    try:
        return Fraction(str(val).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key} must be a rational like 2/5 or a decimal, "
                          f"got {val!r}")


def _parse_cf_literal(text: str) -> list:
    body = text.strip()[1:-1]
    head, sep, tail = body.partition(";")
    if not sep or head.strip() != "0":
        raise ConfigError("continued fraction literal must look like "
                          "[0;a1,a2,...]")
    try:
        quotients = [int(part) for part in tail.split(",") if part.strip()]
    except ValueError:
        raise ConfigError("continued fraction quotients must be integers")
    if not quotients:
        raise ConfigError("continued fraction literal has no quotients")
    return quotients


def _resolve_rotation(cfg: ExperimentConfig):
    """(alpha, cf_or_None) from the alpha spec; cf carries the certified
    expansion when one is available without a depth choice."""
    spec = cfg.text("alpha").strip()
    if spec == "golden":
        return golden_alpha(_GOLDEN_BITS), None
    if spec.startswith("["):
        cf = cf_from_quotients(_parse_cf_literal(spec))
        return cf.alpha, cf
    alpha = _parse_fraction(spec, "alpha")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie strictly inside (0, 1)")
    return alpha, None


def _resolve_cf(cfg: ExperimentConfig, depth: int):
    spec = cfg.text("alpha").strip()
    if spec.startswith("["):
        return cf_from_quotients(_parse_cf_literal(spec))
    if spec == "golden":
        return cf_expand(golden_alpha(_GOLDEN_BITS), depth,
                         uncertainty=Fraction(1, 1 << (_GOLDEN_BITS - 2)))
    alpha = _parse_fraction(spec, "alpha")
    if "/" in spec:
        return cf_expand(alpha, depth, exact=True)
    if cfg.has("uncertainty"):
        return cf_expand(alpha, depth, uncertainty=cfg.fraction("uncertainty"))
    return cf_expand(alpha, depth)


def _transformation(cfg: ExperimentConfig, default: str = "rotation"):
    kind = cfg.text("transformation", default).strip().lower()
    if kind == "doubling":
        return Doubling()
    if kind == "rotation":
        alpha, _ = _resolve_rotation(cfg)
        return Rotation(alpha, exact=cfg.flag("exact"))
    raise ConfigError(f"transformation must be rotation or doubling, "
                      f"got {kind!r}")


def _rotation_omega(cfg: ExperimentConfig) -> Fraction:
    if cfg.has("omega"):
        om = cfg.fraction("omega")
        if not 0 <= om < 1:
            raise ConfigError("omega must lie in [0, 1)")
        return om
    rng = np.random.default_rng(cfg.integer("omega_seed", 0))
    return Fraction(int(rng.integers(1, 1 << 62)), 1 << 62)


def _doubling_omega(cfg: ExperimentConfig, horizon: int) -> BitStream:
    if cfg.has("pattern") or cfg.has("omega"):
        text = cfg.text("pattern" if cfg.has("pattern") else "omega").strip()
        if set(text) - {"0", "1"}:
            raise ConfigError("a doubling-map omega is a 0/1 bit string")
        return BitStream([int(c) for c in text])
    seed = cfg.integer("pattern_seed" if cfg.has("pattern_seed")
                       else "omega_seed", 0)
    return BitStream.random(horizon + 128, seed=seed)


def _parse_interval(text: str, key: str) -> Interval:
    lo, sep, hi = str(text).partition(":")
    if not sep:
        raise ConfigError(f"{key} must be lo:hi, got {text!r}")
    return Interval(_parse_fraction(lo, key), _parse_fraction(hi, key))


def _partition(cfg: ExperimentConfig, default_b="1/2"):
    if cfg.has("a1") or cfg.has("a2"):
        a1 = _parse_interval(cfg.text("a1"), "a1")
        a2 = _parse_interval(cfg.text("a2"), "a2")
        return a1, a2
    b = cfg.fraction("b", default_b)
    if not 0 < b < 1:
        raise ConfigError("partition point b must lie strictly inside (0, 1)")
    return (Interval(Fraction(0), b), Interval(b, Fraction(1)))


# ---------------------------------------------------------------------------
# Serialization

_write_lock = threading.Lock()


def _emit(text: str, out) -> None:
    if not text.endswith("\n"):
        text += "\n"
    with _write_lock:
        if out:
            Path(out).write_text(text)
        else:
            click.echo(text, nl=False)


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value") and obj.__class__.__module__ != "builtins" \
            and hasattr(obj.__class__, "__members__"):
        return obj.value
    return obj


def _to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Command plumbing

def _config_options(fn):
    fn = click.option("--config", "config_path",
                      type=click.Path(exists=True, dir_okay=False),
                      help="flat key=value file; flags override it")(fn)
    fn = click.option("--out", help="output path (default stdout)")(fn)
    return fn


@click.group()
def cli():
    """Numerical experiments on Birkhoff sums and random operator products."""


# ------------------------------------------------------------------ cf ----

@cli.command()
@click.argument("op", required=False, default="expand",
                type=click.Choice(["expand", "convergents", "ostrowski",
                                   "discrepancy"]))
@_config_options
@click.option("--alpha")
@click.option("--depth", type=int)
@click.option("--b")
@click.option("--kk", "--big-k", "kk", type=int,
              help="number of q_k terms for the discrepancy op")
@click.option("--uncertainty")
def cf(op, config_path, out, **kw):
    """Continued fraction expansion, convergents, Ostrowski digits."""
    cfg = ExperimentConfig(config_path, out=out, **kw)
    depth = cfg.integer("depth", 40)
    expansion = _resolve_cf(cfg, depth)
    if op == "expand":
        payload = {"alpha": str(expansion.alpha),
                   "uncertainty": str(expansion.uncertainty),
                   "depth": expansion.depth,
                   "quotients": list(expansion.quotients),
                   "exhausted": expansion.exhausted,
                   "terminated": expansion.terminated}
        _emit(_to_json(payload), cfg.raw("out"))
    elif op == "convergents":
        lines = ["k,a,p,q"]
        for k in range(1, expansion.depth + 1):
            lines.append(f"{k},{expansion.a(k)},{expansion.p[k]},"
                         f"{expansion.q[k]}")
        _emit("\n".join(lines), cfg.raw("out"))
    elif op == "ostrowski":
        exp = ostrowski(cfg.fraction("b"), expansion)
        _emit(_to_json(exp), cfg.raw("out"))
    else:
        kk = cfg.integer("kk", min(16, expansion.depth))
        value = discrepancy_qk_b(expansion, cfg.fraction("b"), kk)
        _emit(_to_json({"K": kk, "discrepancy": float(value),
                        "exact": str(value)}), cfg.raw("out"))


# ------------------------------------------------------------- birkhoff ----

@cli.command()
@click.argument("op", required=False, default="sums",
                type=click.Choice(["sums", "oren", "denjoy-koksma",
                                   "coboundary"]))
@_config_options
@click.option("--alpha")
@click.option("--transformation")
@click.option("--exact", flag_value="true", default=None)
@click.option("--b")
@click.option("--omega")
@click.option("--omega-seed", type=int)
@click.option("--pattern")
@click.option("--pattern-seed", type=int)
@click.option("--n", type=int)
@click.option("--depth", type=int)
@click.option("--k-bound", type=int)
@click.option("--q", type=int)
@click.option("--kk", "--big-k", "kk", type=int,
              help="dyadic index horizon for the obstruction op")
@click.option("--uncertainty")
def birkhoff(op, config_path, out, **kw):
    """Birkhoff sums of the two-piece step function cut at b."""
    cfg = ExperimentConfig(config_path, out=out, **kw)
    f = favourite_f(cfg.fraction("b", "1/2"))
    if op == "sums":
        t = _transformation(cfg)
        n = cfg.integer("n", 1000)
        omega = (_doubling_omega(cfg, n) if isinstance(t, Doubling)
                 else _rotation_omega(cfg))
        series = birkhoff_sums(t, f, omega, n)
        buf = io.StringIO()
        series.write_csv(buf)
        _emit(buf.getvalue(), cfg.raw("out"))
    elif op == "oren":
        expansion = _resolve_cf(cfg, cfg.integer("depth", 64))
        report = oren_analysis(f, expansion)
        if cfg.has("k_bound"):
            report = oren_analysis(f, expansion,
                                   k_bound=cfg.integer("k_bound"))
        _emit(_to_json(report), cfg.raw("out"))
    elif op == "denjoy-koksma":
        n = cfg.integer("n", 10 ** 6)
        expansion = _resolve_cf(cfg, cfg.integer("depth", 64))
        t = Rotation(expansion.alpha, exact=cfg.flag("exact"))
        omega = _rotation_omega(cfg)
        qs = sorted({int(expansion.q[k])
                     for k in range(1, expansion.depth + 1)
                     if 1 <= expansion.q[k] <= n})
        if not qs:
            raise ConfigError("no convergent denominators at or below n")
        series = birkhoff_sums(t, f, omega, qs[-1])
        v = f.variation()
        lines = ["k,q,S,within_variation"]
        for k, qk in enumerate(qs, start=1):
            s = series.sum_exact(qk)
            lines.append(f"{k},{qk},{repr(float(s))},"
                         f"{str(abs(s) <= v).lower()}")
        _emit("\n".join(lines), cfg.raw("out"))
    else:
        t = _transformation(cfg)
        if isinstance(t, Doubling):
            rep = doubling_coboundary_obstruction(
                f, cfg.integer("q", 3), cfg.integer("kk", 12))
            _emit(_to_json(rep), cfg.raw("out"))
            return
        if t.alpha.denominator > 10 ** 6:
            raise ConfigError("coboundary solving needs rational alpha; "
                              "use the oren op for irrational rotations")
        sol = rational_coboundary(t.alpha, f)
        if isinstance(sol, CoboundaryWitness):
            payload = {"solvable": True,
                       "h_cuts": [str(c) for c in sol.h.cuts],
                       "h_values": [str(v) for v in sol.h.values],
                       "residual": str(sol.residual)}
        else:
            payload = {"solvable": False, "witness": str(sol.witness),
                       "period_sum": str(sol.period_sum)}
        _emit(_to_json(payload), cfg.raw("out"))


# ------------------------------------------------------------------ clt ----

@cli.command()
@click.argument("op", required=False, default="distribution",
                type=click.Choice(["distribution", "kac-sigma2",
                                   "range-growth", "w-set", "ln-scale"]))
@_config_options
@click.option("--alpha")
@click.option("--transformation")
@click.option("--exact", flag_value="true", default=None)
@click.option("--b")
@click.option("--omega")
@click.option("--omega-seed", type=int)
@click.option("--pattern")
@click.option("--pattern-seed", type=int)
@click.option("--n", type=int)
@click.option("--nn", "--big-n", "nn", type=int,
              help="horizon for the w-set op")
@click.option("--samples", type=int)
@click.option("--seed", type=int)
@click.option("--normalization",
              type=click.Choice(["sqrt_n", "l2", "sqrt_k"]))
@click.option("--k-index", type=int)
@click.option("--checkpoints")
@click.option("--count", type=int)
@click.option("--c-grid")
@click.option("--beta", type=float)
@click.option("--max-lag", type=int)
@click.option("--depth", type=int)
@click.option("--uncertainty")
def clt(op, config_path, out, **kw):
    """Distributional behaviour of normalized Birkhoff sums."""
    cfg = ExperimentConfig(config_path, out=out, **kw)
    f = favourite_f(cfg.fraction("b", "1/2"))
    if op == "distribution":
        t = _transformation(cfg, default="doubling")
        exp = CltExperiment(t, f, cfg.text("normalization", "sqrt_n"),
                            cfg.integer("n", 4096),
                            cfg.integer("samples", 20000),
                            cfg.integer("seed", 42),
                            k_index=(cfg.integer("k_index")
                                     if cfg.has("k_index") else None))
        rep = empirical_distribution(exp)
        _emit(_to_json(rep), cfg.raw("out"))
    elif op == "kac-sigma2":
        rep = kac_sigma2(f, max_lag=cfg.integer("max_lag", 16))
        _emit(_to_json(rep), cfg.raw("out"))
    elif op == "range-growth":
        t = _transformation(cfg, default="doubling")
        n = cfg.integer("n", 10 ** 6)
        cps = cfg.int_list("checkpoints",
                           default=[10 ** j for j in range(1, 7)
                                    if 10 ** j <= n] or [n])
        omega = (_doubling_omega(cfg, cps[-1]) if isinstance(t, Doubling)
                 else _rotation_omega(cfg))
        probe = range_growth_probe(t, f, omega, cps)
        _emit(_to_json(probe), cfg.raw("out"))
    elif op == "w-set":
        alpha, _ = _resolve_rotation(cfg)
        rep = w_set_report(alpha, f, cfg.integer("nn", 4096),
                           cfg.float_list("c_grid",
                                          default=[0.25, 0.5, 1.0, 2.0]))
        _emit(_to_json(rep), cfg.raw("out"))
    else:
        expansion = _resolve_cf(cfg, cfg.integer("depth", 64))
        rep = ln_scale_experiment(expansion, f, cfg.integer("count", 8),
                                  cfg.integer("samples", 2000),
                                  cfg.integer("seed", 42),
                                  beta=cfg.number("beta", 1.5))
        _emit(_to_json(rep), cfg.raw("out"))


# ---------------------------------------------------------------- hardy ----

def _hardy_spec(cfg: ExperimentConfig):
    a1, a2 = _partition(cfg)
    kwargs = {"a1": a1, "a2": a2}
    if cfg.has("nn"):
        kwargs["N"] = cfg.integer("nn")
    if cfg.has("m"):
        kwargs["M"] = cfg.integer("m")
    if cfg.has("transformation") or cfg.has("alpha"):
        kwargs["transformation"] = _transformation(cfg, default="doubling")
    return builtin_pair(cfg.text("pair"), **kwargs)


def _hardy_omegas(cfg: ExperimentConfig, spec, horizon: int) -> list:
    count = cfg.integer("omega_count", 1)
    if count < 1:
        raise ConfigError("omega_count must be >= 1")
    doubling = isinstance(spec.transformation, Doubling)
    if (cfg.has("omega") or cfg.has("pattern")) and count == 1:
        return [_doubling_omega(cfg, horizon) if doubling
                else _rotation_omega(cfg)]
    base = cfg.integer("omega_seed", 0)
    if doubling:
        return [BitStream.random(horizon + 128, seed=base + i)
                for i in range(count)]
    rng = np.random.default_rng(base)
    return [Fraction(int(rng.integers(1, 1 << 62)), 1 << 62)
            for _ in range(count)]


def _default_checkpoints(n: int) -> list:
    cps = sorted({1 << j for j in range(n.bit_length()) if 1 << j <= n}
                 | {n})
    return cps


@cli.command()
@click.argument("op", required=False, default="classify",
                type=click.Choice(["classify", "trajectory", "right-inverse",
                                   "certificate"]))
@_config_options
@click.option("--pair", type=click.Choice(BUILTIN_PAIRS))
@click.option("--alpha")
@click.option("--transformation")
@click.option("--exact", flag_value="true", default=None)
@click.option("--b")
@click.option("--a1")
@click.option("--a2")
@click.option("--omega")
@click.option("--omega-seed", type=int)
@click.option("--omega-count", type=int)
@click.option("--pattern")
@click.option("--pattern-seed", type=int)
@click.option("--n", type=int)
@click.option("--nn", "--big-n", "nn", type=int, help="coefficient truncation")
@click.option("--m", type=int, help="boundary sample count")
@click.option("--checkpoints")
@click.option("--s")
@click.option("--depth", type=int)
@click.option("--uncertainty")
def hardy(op, config_path, out, **kw):
    """Random products of multiplication operators on the disk."""
    cfg = ExperimentConfig(config_path, out=out, **kw)
    if op == "classify":
        rep = classify(_hardy_spec(cfg))
        _emit(rep.to_json(), cfg.raw("out"))
    elif op in ("trajectory", "right-inverse"):
        spec = _hardy_spec(cfg)
        n = cfg.integer("n", 1024)
        cps = cfg.int_list("checkpoints", default=_default_checkpoints(n))
        omegas = _hardy_omegas(cfg, spec, cps[-1])
        with ThreadPoolExecutor(max_workers=thread_cap()) as ex:
            trs = list(ex.map(lambda om: norm_trajectory(spec, om, cps),
                              omegas))
        if op == "right-inverse" and trs[0].log_inverse_norms is None:
            raise ConfigError("right-inverse probe needs zero-free symbols; "
                              f"pair {cfg.text('pair')!r} has a zero")
        lines = ["omega,n,log_norm,slope" +
                 (",log_inverse_norm" if trs[0].log_inverse_norms is not None
                  else "")]
        for i, tr in enumerate(trs):
            for j, c in enumerate(tr.checkpoints):
                row = f"{i},{c},{repr(float(tr.log_norms[j]))}," \
                      f"{repr(float(tr.slopes[j]))}"
                if tr.log_inverse_norms is not None:
                    row += f",{repr(float(tr.log_inverse_norms[j]))}"
                lines.append(row)
        _emit("\n".join(lines), cfg.raw("out"))
    else:
        alpha, _ = _resolve_rotation(cfg)
        b = (cfg.fraction("b") if cfg.has("b") else (2 * alpha) % 1)
        spec = unimodular_pair(b, s=cfg.number("s", 0.5),
                               transformation=Rotation(alpha,
                                                       exact=cfg.flag("exact")))
        expansion = _resolve_cf(cfg, cfg.integer("depth", 64))
        omega = _rotation_omega(cfg)
        cert = nonuniversality_certificate(spec, omega,
                                           cfg.integer("n", 10 ** 4),
                                           cf=expansion)
        payload = _jsonable(cert)
        payload["produced"] = bool(cert)
        _emit(_to_json(payload), cfg.raw("out"))


# --------------------------------------------------------------- entire ----

def _exp_symbol(text: str, key: str) -> ExpTypeSymbol:
    spec = str(text).strip()
    if spec == "D":
        return ExpTypeSymbol.derivation()
    kind, sep, body = spec.partition(":")
    if kind == "exp" and sep:
        return ExpTypeSymbol.exp(complex(body), label=spec)
    if kind == "taylor" and sep:
        try:
            coeffs = tuple(complex(part) for part in body.split(","))
        except ValueError:
            raise ConfigError(f"{key}: taylor coefficients must be numbers")
        return ExpTypeSymbol.from_taylor(coeffs, label=spec)
    raise ConfigError(f"{key} must be 'D', 'exp:a', or 'taylor:c0,c1,...', "
                      f"got {text!r}")


def _entire_number(cfg: ExperimentConfig, key: str, default: str):
    """Fraction when the literal is rational (keeps the exact lane),
    complex otherwise."""
    text = cfg.text(key, default).strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return complex(text)
    except ValueError:
        raise ConfigError(f"{key} must be rational or complex, got {text!r}")


@cli.command()
@click.argument("op", required=False, default="product",
                type=click.Choice(["product", "right-inverse", "classify"]))
@_config_options
@click.option("--lam")
@click.option("--b")
@click.option("--a1")
@click.option("--a2")
@click.option("--pattern")
@click.option("--pattern-seed", type=int)
@click.option("--omega")
@click.option("--omega-seed", type=int)
@click.option("--n", type=int)
@click.option("--nn", "--big-n", "nn", type=int, help="degree truncation")
@click.option("--k", type=int, help="monomial degree z^k as input")
@click.option("--k-max", type=int)
@click.option("--coeffs")
@click.option("--phi1")
@click.option("--phi2")
@click.option("--m1")
@click.option("--m2")
@click.option("--radius", type=float)
def entire(op, config_path, out, **kw):
    """Random products of lam*phi(D) operators on polynomials."""
    cfg = ExperimentConfig(config_path, out=out, **kw)
    if op == "classify":
        phi1 = _exp_symbol(cfg.text("phi1", "exp:1"), "phi1")
        phi2 = _exp_symbol(cfg.text("phi2", "D"), "phi2")
        rep = phiD_classifier(phi1, phi2,
                              cfg.fraction("m1", "1/2"),
                              cfg.fraction("m2", "1/2"),
                              radius=cfg.number("radius", 4.0))
        _emit(rep.to_json(), cfg.raw("out"))
        return
    a1, a2 = _partition(cfg, default_b="1/2")
    spec = EntireProductSpec(_entire_number(cfg, "lam", "2"),
                             _entire_number(cfg, "b", "1"),
                             a1, a2, Doubling(), N=cfg.integer("nn", 1024))
    n = cfg.integer("n", 100)
    omega = _doubling_omega(cfg, n)
    if op == "product":
        if cfg.has("coeffs"):
            f = PolyVector(tuple(_parse_fraction(part, "coeffs")
                                 for part in cfg.text("coeffs").split(",")))
        else:
            f = PolyVector.monomial(cfg.integer("k", 5))
        tr = noncommuting_product(spec, omega, n, f)
        payload = {"n": n, "a1": tr.a1, "a2": tr.a2, "c": tr.c,
                   "max_rel_diff": tr.max_rel_diff,
                   "degree": tr.direct.degree,
                   "p5": float(tr.direct.seminorm(5.0))}
        _emit(_to_json(payload), cfg.raw("out"))
    else:
        ks = list(range(cfg.integer("k_max", 2) + 1))
        _emit(decay_csv(spec, omega, ks, range(1, n + 1)), cfg.raw("out"))


# ---------------------------------------------------------------- suite ----

@cli.command()
@click.option("--seed", type=int, default=acceptance.MASTER_SEED,
              show_default=True)
@click.option("--only", help="comma-separated criterion numbers")
@click.option("--out", help="write the result records as JSON")
def suite(seed, only, out):
    """Run the acceptance criteria and print a PASS/FAIL table."""
    numbers = None
    if only:
        try:
            numbers = [int(part) for part in only.split(",") if part.strip()]
        except ValueError:
            raise ConfigError("--only takes comma-separated integers")
        unknown = set(numbers) - set(range(1, len(acceptance.CRITERIA) + 1))
        if unknown:
            raise ConfigError(f"unknown criteria: {sorted(unknown)}")
    results = acceptance.run_all(seed, numbers=numbers)
    click.echo(acceptance.format_table(results))
    if out:
        records = [{"number": r.number, "name": r.name, "passed": r.passed,
                    "detail": r.detail, "metrics": _jsonable(r.metrics)}
                   for r in results]
        _emit(_to_json(records), out)
    if not all(r.passed for r in results):
        raise SystemExit(1)


# ----------------------------------------------------------------------------

def run(subcommand, config=None) -> int:
    """Programmatic mirror of the command line: exit code of
    `ergolin <subcommand> [op] [flags]`.

    `subcommand` may carry the op ("hardy classify"); `config` is either a
    path to a key=value file or a mapping of config keys.
    """
    args = list(str(subcommand).split())
    if isinstance(config, (str, Path)):
        args += ["--config", str(config)]
    elif config:
        for key, val in config.items():
            key = str(key).replace("_", "-")
            args += [f"--{key}", str(val)]
    elif config is not None and not isinstance(config, dict):
        raise ConfigError("config must be a path or a mapping")
    return _dispatch(args)


def _dispatch(args) -> int:
    try:
        cli(args=list(args), standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except PrecisionError as exc:
        click.echo(f"precision error: {exc}", err=True)
        return 3
    except InternalConsistencyError as exc:
        click.echo(f"internal consistency error: {exc}", err=True)
        return 4
    except ErgolinError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def main():
    sys.exit(_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

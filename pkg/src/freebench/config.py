"""Experiment configuration: JSON schema, validation, polynomial grammar.

A config is a JSON object with sections experiment / seed / oracle /
model / schedule / polynomials / tolerances / output_dir.  Validation
is strict: unknown keys are rejected and every error names the exact
field path.  Polynomials use a tiny grammar: generators are written
``f<factor>.g<index>``, juxtaposition multiplies, ``^`` raises to an
integer power, integer coefficients and ``+``/``-`` combine terms.
Example: ``2 f1.g0^2 f2.g0 - 1``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

from .atomic import AtomicAlgebra
from .models import DTensorAbelian, ModelSpec, QuantileDiagonal, SeededGue
from .moments import DiscreteSelfAdjoint, MomentOracle, SemicircularFamily
from .ncpoly import GenId, NcPolynomial


class ConfigError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


# ---------------------------------------------------------------------
# Polynomial grammar
# ---------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(f\d+\.g\d+)|(\d+)|(\^)|(\+)|(-)|(\S))")


def parse_polynomial(text, path="polynomial"):
    """Parse the monomial/sum grammar into an NcPolynomial."""
    tokens = []
    for m in _TOKEN.finditer(text):
        ident, num, caret, plus, minus, bad = m.groups()
        if bad:
            raise ConfigError(path, f"unexpected character {bad!r} in {text!r}")
        if ident:
            f, g = ident.split(".")
            tokens.append(("gen", GenId(int(f[1:]), int(g[1:]))))
        elif num:
            tokens.append(("int", int(num)))
        elif caret:
            tokens.append(("pow", None))
        elif plus:
            tokens.append(("plus", None))
        elif minus:
            tokens.append(("minus", None))
    if not tokens:
        raise ConfigError(path, f"empty polynomial {text!r}")

    pos = 0

    def parse_term():
        nonlocal pos
        coeff = 1
        word = NcPolynomial.one()
        saw_factor = False
        while pos < len(tokens):
            kind, val = tokens[pos]
            if kind in ("plus", "minus"):
                break
            if kind == "int":
                coeff *= val
                pos += 1
            elif kind == "gen":
                pos += 1
                power = 1
                if pos < len(tokens) and tokens[pos][0] == "pow":
                    pos += 1
                    if pos >= len(tokens) or tokens[pos][0] != "int":
                        raise ConfigError(path, f"'^' needs an integer exponent in {text!r}")
                    power = tokens[pos][1]
                    pos += 1
                word = word * (NcPolynomial.generator(val.factor, val.index) ** power)
            elif kind == "pow":
                raise ConfigError(path, f"'^' must follow a generator in {text!r}")
            saw_factor = True
        if not saw_factor:
            raise ConfigError(path, f"empty term in {text!r}")
        return coeff * word

    sign = 1
    if tokens[pos][0] in ("plus", "minus"):
        sign = -1 if tokens[pos][0] == "minus" else 1
        pos += 1
    result = sign * parse_term()
    while pos < len(tokens):
        kind, _ = tokens[pos]
        if kind == "plus":
            sign = 1
        elif kind == "minus":
            sign = -1
        else:
            raise ConfigError(path, f"expected '+' or '-' in {text!r}")
        pos += 1
        result = result + sign * parse_term()
    return result


# ---------------------------------------------------------------------
# Schema helpers
# ---------------------------------------------------------------------


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _require(obj, key, path, kind=None):
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing required key")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}", f"expected {kind.__name__}")
    return val


def _parse_atoms(items, path):
    if not isinstance(items, list) or not items:
        raise ConfigError(path, "expected a nonempty list of [value, weight] pairs")
    atoms = []
    for i, pair in enumerate(items):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{path}[{i}]", "expected [value, weight]")
        atoms.append((float(pair[0]), float(pair[1])))
    total = sum(w for _, w in atoms)
    if abs(total - 1.0) > 1e-12:
        raise ConfigError(path, f"weights sum to {total!r}, expected 1")
    return tuple(atoms)


def _parse_amalgam(obj, path):
    _check_keys(obj, {"blocks"}, path)
    blocks = _require(obj, "blocks", path, list)
    parsed = []
    for i, pair in enumerate(blocks):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{path}.blocks[{i}]", "expected [size, weight]")
        parsed.append((int(pair[0]), float(pair[1])))
    try:
        return AtomicAlgebra(tuple(parsed))
    except ValueError as e:
        raise ConfigError(f"{path}.blocks", str(e)) from None


def _parse_law(obj, path):
    _check_keys(obj, {"type", "count", "atoms"}, path)
    kind = _require(obj, "type", path, str)
    if kind == "semicircular":
        return SemicircularFamily(int(obj.get("count", 1)))
    if kind == "discrete":
        return DiscreteSelfAdjoint(_parse_atoms(_require(obj, "atoms", path), f"{path}.atoms"))
    raise ConfigError(f"{path}.type", f"unknown law type {kind!r}")


def _parse_recipe(obj, path):
    _check_keys(obj, {"type", "count", "seed", "atoms"}, path)
    kind = _require(obj, "type", path, str)
    if kind == "seeded_gue":
        return SeededGue(count=int(obj.get("count", 1)), seed=int(obj.get("seed", 0)))
    if kind == "quantile_diagonal":
        atoms = _parse_atoms(_require(obj, "atoms", path), f"{path}.atoms")
        return QuantileDiagonal(DiscreteSelfAdjoint(atoms))
    if kind == "d_tensor_abelian":
        atoms = _parse_atoms(_require(obj, "atoms", path), f"{path}.atoms")
        return DTensorAbelian(DiscreteSelfAdjoint(atoms))
    raise ConfigError(f"{path}.type", f"unknown recipe type {kind!r}")


_DEFAULT_TOLERANCES = {
    "moment_abs": 0.05,
    "eap": 0.1,
    "collapse": 0.1,
    "norm_margin": 1e-8,
    "slope_range": [-2.6, -1.4],
    "tail_eps_grid": [0.02, 0.05, 0.1],
    "cover_eps": [0.1, 0.2, 0.3, 0.5],
}


@dataclass
class ExperimentConfig:
    """Validated experiment description; see module docstring for the schema."""

    experiment: str
    seed: int
    oracle_factors: dict
    oracle_amalgam: AtomicAlgebra | None
    degree_cap: int
    model: ModelSpec
    k_list: list
    samples: int
    polynomials: list  # (source text, NcPolynomial)
    tolerances: dict
    output_dir: str

    def build_oracle(self):
        return MomentOracle(
            self.oracle_factors, amalgam=self.oracle_amalgam, degree_cap=self.degree_cap
        )

    def to_jsonable(self):
        """Canonical dict form; parse(serialize(cfg)) == cfg semantically."""
        oracle = {
            "factors": [
                {"label": f, "law": _law_to_json(law)}
                for f, law in sorted(self.oracle_factors.items())
            ]
        }
        if self.oracle_amalgam is not None:
            oracle["amalgam"] = {"blocks": [[r, g] for r, g in self.oracle_amalgam.blocks]}
        oracle["degree_cap"] = self.degree_cap
        model = {
            "factor1": _recipe_to_json(self.model.factor1),
            "factor2": _recipe_to_json(self.model.factor2),
        }
        if self.model.amalgam is not None:
            model["amalgam"] = {"blocks": [[r, g] for r, g in self.model.amalgam.blocks]}
        if self.model.norm_bounds:
            model["norm_bounds"] = {
                str(GenId(*g)): b for g, b in sorted(self.model.norm_bounds.items())
            }
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "oracle": oracle,
            "model": model,
            "schedule": {"k_list": list(self.k_list), "samples": self.samples},
            "polynomials": [src for src, _ in self.polynomials],
            "tolerances": self.tolerances,
            "output_dir": self.output_dir,
        }

    def config_hash(self):
        text = json.dumps(self.to_jsonable(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _law_to_json(law):
    if isinstance(law, SemicircularFamily):
        return {"type": "semicircular", "count": law.count}
    if isinstance(law, DiscreteSelfAdjoint):
        return {"type": "discrete", "atoms": [[v, w] for v, w in law.atoms]}
    raise TypeError(f"unknown law {type(law).__name__}")


def _recipe_to_json(recipe):
    if isinstance(recipe, SeededGue):
        return {"type": "seeded_gue", "count": recipe.count, "seed": recipe.seed}
    if isinstance(recipe, QuantileDiagonal):
        return {"type": "quantile_diagonal", "atoms": [[v, w] for v, w in recipe.law.atoms]}
    if isinstance(recipe, DTensorAbelian):
        return {"type": "d_tensor_abelian", "atoms": [[v, w] for v, w in recipe.law.atoms]}
    raise TypeError(f"unknown recipe {type(recipe).__name__}")


def parse_config(obj, path="config"):
    """Validate a raw JSON object into an ExperimentConfig."""
    _check_keys(
        obj,
        {
            "experiment",
            "seed",
            "oracle",
            "model",
            "schedule",
            "polynomials",
            "tolerances",
            "output_dir",
        },
        path,
    )
    experiment = _require(obj, "experiment", path, str)
    seed = _require(obj, "seed", path, int)

    oracle_obj = _require(obj, "oracle", path, dict)
    _check_keys(oracle_obj, {"factors", "amalgam", "degree_cap"}, f"{path}.oracle")
    factors = {}
    factor_items = _require(oracle_obj, "factors", f"{path}.oracle", list)
    for i, item in enumerate(factor_items):
        fpath = f"{path}.oracle.factors[{i}]"
        _check_keys(item, {"label", "law"}, fpath)
        label = _require(item, "label", fpath, int)
        if label <= 0:
            raise ConfigError(f"{fpath}.label", "factor labels must be positive")
        if label in factors:
            raise ConfigError(f"{fpath}.label", f"duplicate factor label {label}")
        factors[label] = _parse_law(_require(item, "law", fpath, dict), f"{fpath}.law")
    amalgam = None
    if "amalgam" in oracle_obj and oracle_obj["amalgam"] is not None:
        amalgam = _parse_amalgam(oracle_obj["amalgam"], f"{path}.oracle.amalgam")
    degree_cap = int(oracle_obj.get("degree_cap", 16))

    model_obj = _require(obj, "model", path, dict)
    _check_keys(model_obj, {"amalgam", "factor1", "factor2", "norm_bounds"}, f"{path}.model")
    model_amalgam = None
    if "amalgam" in model_obj and model_obj["amalgam"] is not None:
        model_amalgam = _parse_amalgam(model_obj["amalgam"], f"{path}.model.amalgam")
    recipe1 = _parse_recipe(_require(model_obj, "factor1", f"{path}.model", dict), f"{path}.model.factor1")
    recipe2 = _parse_recipe(_require(model_obj, "factor2", f"{path}.model", dict), f"{path}.model.factor2")
    bounds = None
    if "norm_bounds" in model_obj and model_obj["norm_bounds"] is not None:
        bounds = {}
        for key, val in model_obj["norm_bounds"].items():
            m = re.fullmatch(r"f(\d+)\.g(\d+)", key)
            if not m:
                raise ConfigError(f"{path}.model.norm_bounds.{key}", "expected f<k>.g<i>")
            bounds[GenId(int(m.group(1)), int(m.group(2)))] = float(val)
    try:
        model = ModelSpec(
            factor1=recipe1, factor2=recipe2, amalgam=model_amalgam, norm_bounds=bounds
        )
    except ValueError as e:
        raise ConfigError(f"{path}.model", str(e)) from None

    sched = _require(obj, "schedule", path, dict)
    _check_keys(sched, {"k_list", "samples"}, f"{path}.schedule")
    k_list = _require(sched, "k_list", f"{path}.schedule", list)
    if not k_list or not all(isinstance(k, int) and k >= 1 for k in k_list):
        raise ConfigError(f"{path}.schedule.k_list", "expected a nonempty list of ints >= 1")
    samples = _require(sched, "samples", f"{path}.schedule", int)
    if samples < 2:
        raise ConfigError(f"{path}.schedule.samples", "need at least 2 samples")

    poly_items = _require(obj, "polynomials", path, list)
    if not poly_items:
        raise ConfigError(f"{path}.polynomials", "need at least one polynomial")
    polynomials = []
    known_factors = set(factors) | ({0} if amalgam is not None else set())
    for i, src in enumerate(poly_items):
        if not isinstance(src, str):
            raise ConfigError(f"{path}.polynomials[{i}]", "expected a string")
        p = parse_polynomial(src, f"{path}.polynomials[{i}]")
        for g in p.generators():
            if g.factor not in known_factors:
                raise ConfigError(
                    f"{path}.polynomials[{i}]",
                    f"generator {g} references a factor the oracle has no law for",
                )
        polynomials.append((src, p))

    tolerances = dict(_DEFAULT_TOLERANCES)
    if "tolerances" in obj and obj["tolerances"] is not None:
        _check_keys(obj["tolerances"], set(_DEFAULT_TOLERANCES), f"{path}.tolerances")
        tolerances.update(obj["tolerances"])

    output_dir = _require(obj, "output_dir", path, str)

    return ExperimentConfig(
        experiment=experiment,
        seed=seed,
        oracle_factors=factors,
        oracle_amalgam=amalgam,
        degree_cap=degree_cap,
        model=model,
        k_list=list(k_list),
        samples=samples,
        polynomials=polynomials,
        tolerances=tolerances,
        output_dir=output_dir,
    )


def load_config(path):
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON: {e}") from None
    return parse_config(raw)

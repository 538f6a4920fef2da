"""Named (score, distribution) scenarios with known minimizers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .distributions import Cauchy, Normal, Uniform
from .errors import EnvelopeUnavailable, InvalidParameter, UnknownScenario
from .population import CATALOG, PopulationModel, boundedness_envelope, build_model
from .scores import build_score, loss_for


@dataclass(frozen=True)
class Preset:
    name: str
    build: Callable[[dict], PopulationModel]
    catalog: Optional[str]
    defaults: dict
    description: str


def _quantile(p):
    alpha = float(p.get("alpha", 0.5))
    if not 0.0 < alpha < 1.0:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")
    dist = Normal(p.get("mu", 0.0), p.get("sigma", 1.0))
    return build_model(loss_for(build_score("quantile_step", alpha=alpha)), dist,
                       m=float(dist.quantile(alpha)), name="quantile")


def _hoeffding_mean(p):
    a, b = float(p.get("a", 0.0)), float(p.get("b", 1.0))
    dist = Uniform(a, b)
    return build_model(loss_for(build_score("identity")), dist, m=dist.mean, name="hoeffding_mean")


def _normal_cdf_score(p):
    dist = Normal(p.get("mu", 0.0), p.get("sigma", 1.0))
    return build_model(loss_for(build_score("normal_cdf_shift")), dist, m=dist.mu, name="normal_cdf_score")


def _cauchy_cdf_score(p):
    dist = Cauchy(p.get("location", 0.0), p.get("scale", 1.0))
    score = build_score("cauchy_cdf_shift", scale=p.get("score_scale", 1.0))
    return build_model(loss_for(score), dist, m=dist.location, name="cauchy_cdf_score")


def _uniform_normal_score(p):
    dist = Uniform(p.get("a", -1.0), p.get("b", 1.0))
    return build_model(loss_for(build_score("normal_cdf_shift")), dist, m=dist.mean,
                       name="uniform_normal_score")


def _smoothed_median(p):
    score = build_score("smoothed_median", c=float(p.get("c", 1.0)))
    return build_model(loss_for(score), Normal(), m=0.0, name="smoothed_median")


def _huber(p):
    score = build_score("huber", c=float(p.get("c", 1.0)))
    return build_model(loss_for(score), Normal(), m=0.0, name="huber")


def _rational_sqrt_uniform(p):
    return build_model(loss_for(build_score("rational_sqrt")), Uniform(-1.0, 1.0), m=0.0,
                       name="rational_sqrt_uniform")


PRESETS = {
    "quantile": Preset("quantile", _quantile, None, {"alpha": 0.5, "mu": 0.0, "sigma": 1.0},
                       "alpha-quantile of N(mu, sigma^2)"),
    "hoeffding_mean": Preset("hoeffding_mean", _hoeffding_mean, None, {"a": 0.0, "b": 1.0},
                             "running mean of U[a, b]"),
    "normal_cdf_score": Preset("normal_cdf_score", _normal_cdf_score, "normal",
                               {"mu": 0.0, "sigma": 1.0}, "phi = Phi - 1/2 on N(mu, sigma^2)"),
    "cauchy_cdf_score": Preset("cauchy_cdf_score", _cauchy_cdf_score, "cauchy",
                               {"location": 0.0, "scale": 1.0, "score_scale": 1.0},
                               "phi = arctan/pi on Cauchy data"),
    "uniform_normal_score": Preset("uniform_normal_score", _uniform_normal_score, "uniform",
                                   {"a": -1.0, "b": 1.0}, "phi = Phi - 1/2 on U[a, b]"),
    "smoothed_median": Preset("smoothed_median", _smoothed_median, "smoothed_median", {"c": 1.0},
                              "clipped linear score of width c on N(0, 1)"),
    "huber": Preset("huber", _huber, "huber", {"c": 1.0}, "Huber score on N(0, 1)"),
    "rational_sqrt_uniform": Preset("rational_sqrt_uniform", _rational_sqrt_uniform, "rational_sqrt", {},
                                    "phi(u) = u / sqrt(1 + u^2) on U[-1, 1]"),
}

ALIASES = {"quantile_normal": "quantile"}


def resolve_name(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in PRESETS:
        raise UnknownScenario(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return name


def get_preset(name: str, **params) -> PopulationModel:
    preset = PRESETS[resolve_name(name)]
    unknown = set(params) - set(preset.defaults)
    if unknown:
        raise InvalidParameter(f"preset {preset.name!r} has no parameter(s) {sorted(unknown)}")
    return preset.build({**preset.defaults, **params})


def _envelope_text(model: PopulationModel) -> str:
    try:
        env = boundedness_envelope(model.score, model.dist, model.m)
    except EnvelopeUnavailable:
        return "unavailable"
    A = env.A(1.0)
    if model.score.bounded:
        return f"A(x)={A:g}"
    return f"A(1)={A:g} (support envelope)"


def _K_text(preset: Preset, model: PopulationModel) -> str:
    if preset.catalog is not None:
        formula = CATALOG[preset.catalog].formula
        if preset.name == "cauchy_cdf_score":
            # both scales are 1 in the default preset
            formula = "K(x)=(1/pi)arctan(x/2)"
        return formula
    if preset.name == "quantile":
        return "K(x)=F(m+x)-alpha"
    if preset.name == "hoeffding_mean":
        return "K(x)=x"
    return "none"


def list_presets() -> list:
    """One record per preset with its score, data law, minimizer and closed forms."""
    out = []
    for name, preset in PRESETS.items():
        model = preset.build(dict(preset.defaults))
        out.append({
            "name": name,
            "score": model.score.kind.value,
            "distribution": repr(model.dist),
            "m": model.m,
            "K": _K_text(preset, model),
            "envelope": _envelope_text(model),
            "description": preset.description,
        })
    return out


def format_presets(records=None) -> str:
    records = list_presets() if records is None else records
    lines = []
    for r in records:
        m = "0" if r["m"] == 0 else f"{r['m']:.17g}"
        lines.append(f"{r['name']}: score={r['score']} distribution={r['distribution']} "
                     f"m={m} {r['K']} envelope {r['envelope']}")
    return "\n".join(lines)


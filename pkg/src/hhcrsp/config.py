"""key=value solver configuration and the ablation variants."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from hhcrsp.brkga import BrkgaConfig
from hhcrsp.decoder import FULL, SIMPLE, DecoderConfig
from hhcrsp.instance import parse_key_values
from hhcrsp.ipr import IprConfig

VARIANTS = ("BRKGA-MP", "BRKGA-MP-MI", "BRKGA-MP-IPR", "BRKGA-MP-MI-IPR")
DECODER_ALIASES = {"sd": SIMPLE, "fd": FULL, SIMPLE: SIMPLE, FULL: FULL}

_IPR_KEYS = {
    "ipr_pairs": "pairs",
    "ipr_selection": "selection",
    "ipr_path_pct": "path_pct",
    "ipr_frequency": "frequency",
    "ipr_min_distance": "min_distance",
}


@dataclass(frozen=True)
class SolverConfig:
    brkga: BrkgaConfig = BrkgaConfig()
    ipr: IprConfig = IprConfig()
    decoder: DecoderConfig = DecoderConfig()

    def for_variant(self, variant: str) -> tuple[BrkgaConfig, IprConfig | None]:
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
        islands = "-MI" in variant
        brkga = self.brkga if islands else replace(self.brkga, num_islands=1)
        return brkga, (self.ipr if variant.endswith("-IPR") else None)


def _opt(conv):
    return lambda raw: None if raw.strip().lower() in ("", "none") else conv(raw)


_BRKGA_TYPES = {
    "population_size": int,
    "elite_pct": float,
    "mutant_pct": float,
    "total_parents": int,
    "elite_parents": int,
    "bias": str,
    "num_islands": int,
    "immigrants": int,
    "exchange_interval": int,
    "classic_rho_e": _opt(float),
    "seed": int,
    "stall_limit": _opt(int),
    "max_generations": _opt(int),
    "max_seconds": _opt(float),
}
_IPR_TYPES = {"pairs": int, "selection": str, "path_pct": float, "frequency": int, "min_distance": float}


def apply_overrides(cfg: SolverConfig, values: Mapping[str, str]) -> SolverConfig:
    brkga_kw, ipr_kw, dec_kw = {}, {}, {}
    weights = list(cfg.decoder.weights)
    known = set(_BRKGA_TYPES) | set(_IPR_KEYS) | {"decoder", "tie_tol", "lambda1", "lambda2", "lambda3"}
    for key, raw in values.items():
        if key not in known:
            raise ValueError(f"unknown configuration key {key!r}")
        if key == "decoder":
            if raw.lower() not in DECODER_ALIASES:
                raise ValueError(f"decoder must be sd or fd, not {raw!r}")
            dec_kw["mode"] = DECODER_ALIASES[raw.lower()]
            continue
        try:
            if key in _BRKGA_TYPES:
                brkga_kw[key] = _BRKGA_TYPES[key](raw)
            elif key in _IPR_KEYS:
                attr = _IPR_KEYS[key]
                ipr_kw[attr] = _IPR_TYPES[attr](raw)
            elif key == "tie_tol":
                dec_kw["tie_tol"] = float(raw)
            else:
                weights[int(key[-1]) - 1] = float(raw)
        except ValueError:
            raise ValueError(f"bad value {raw!r} for {key}") from None
    dec_kw["weights"] = tuple(weights)
    out = SolverConfig(
        replace(cfg.brkga, **brkga_kw),
        replace(cfg.ipr, **ipr_kw),
        replace(cfg.decoder, **dec_kw),
    )
    out.brkga.check()
    return out


def load_config(path, base: SolverConfig | None = None) -> SolverConfig:
    with open(path, encoding="utf-8") as fh:
        values = parse_key_values(fh)
    return apply_overrides(base or SolverConfig(), values)

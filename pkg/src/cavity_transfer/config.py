"""Scenario configuration: YAML with unit-suffixed keys, validated against defaults.

Every physical quantity carries its unit in the key name
(``chi_aa_over_2pi_khz``, ``t1_a_us`` ...).  Unknown keys and wrong types are
rejected with the dotted path of the offending field.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .calibration import KHZ, MHZ, ConversionCalibration, DeviceParams
from .errors import ConfigError
from .pulses import WavepacketSpec, default_wavepacket
from .transfer import ChannelSpec, EfficiencyBudget

EXPERIMENTS = ("synthesize", "transfer", "entangle", "correct", "sweep", "tomo", "process")


def _device(fa, ft, chi_ab, chi_at, chi_bt, chi_aa, chi_bb, chi_tt, t1a, t2ra, t1b, t1t, t2rt, p_exc, nth):
    return {
        "omega_a_over_2pi_mhz": fa, "omega_b_over_2pi_mhz": 10031.5, "omega_t_over_2pi_mhz": ft,
        "chi_ab_over_2pi_khz": chi_ab, "chi_at_over_2pi_mhz": chi_at, "chi_bt_over_2pi_mhz": chi_bt,
        "chi_aa_over_2pi_khz": chi_aa, "chi_bb_over_2pi_khz": chi_bb, "chi_tt_over_2pi_mhz": chi_tt,
        "t1_a_us": t1a, "t2r_a_us": t2ra, "t1_b_us": t1b, "t1_t_us": t1t, "t2r_t_us": t2rt,
        "p_excite_static": p_exc, "n_thermal_a": nth,
    }


DEFAULTS: dict[str, Any] = {
    "experiment": "transfer",
    "seed": 0,
    "output_dir": "out",
    "device": {
        "sender": _device(4219.3, 6156.1, -16.0, -2.86, -2.4, -8.0, -8.0, -183.43,
                          460.0, 102.0, 0.14, 26.0, 12.0, 0.195, 0.166),
        "receiver": _device(4269.6, 6417.6, -12.0, -2.29, -2.18, -5.0, -6.0, -196.17,
                            770.0, 130.0, 0.11, 27.0, 12.0, 0.209, 0.172),
        "intrinsic_decay": True,
    },
    "pumps": {
        "g_max_over_2pi_khz": 400.0,
        "xi_sq_max": 50.0,
        "xi2_sq": 50.0,
        "ring_time_ns": 200.0,
        "stark_shifts": True,
    },
    "channel": {"eta_tx": 0.85, "delay_ns": 0.0, "circulator_ideal": True},
    "budget": {
        "eta_trunc_s": 0.99, "eta_excite_s": 0.98, "eta_miscal_s": 0.98,
        "eta_trunc_r": 0.99, "eta_excite_r": 0.94, "eta_miscal_r": 0.99,
        "p_success_s": 0.78 / 0.87, "p_success_r": 0.87,
    },
    "wavepacket": {
        "duration_us": 6.0, "dt_ns": 2.0, "carrier_detuning_over_2pi_mhz": -1.3, "energy_fraction": 1.0,
    },
    "state": {"kind": "fock", "n": 1, "alpha_re": 0.0, "alpha_im": 0.0, "dim": 10},
    "code": "binomial",
    "correct": {"eta": 0.74},
    "sweep": {"eta_min": 0.5, "eta_max": 1.0, "points": 50, "workers": 2},
    "entangle": {"dim": 5, "rate_per_us": 1.0 / 140.0, "rate_unconditioned_per_us": 1.0 / 110.0},
    "tomo": {"alpha_max": 2.5, "points": 51, "dim": 8, "noise_rel": 0.01, "trials": 1, "eta": 1.0,
             "normalize": True},
    "process": {"code": "fock", "eta": 0.74, "dephasing_weight": 0.02, "d": 5},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(where, "unknown field")
        ref = base[key]
        if isinstance(ref, dict):
            if not isinstance(value, dict):
                raise ConfigError(where, "expected a mapping")
            out[key] = _merge(ref, value, where)
        else:
            out[key] = _coerce(ref, value, where)
    return out


def _coerce(ref, value, where):
    if isinstance(ref, bool):
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected true/false, got {value!r}")
        return value
    if isinstance(ref, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return value
    if isinstance(ref, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(where, f"expected a number, got {value!r}")
        if not np.isfinite(value):
            raise ConfigError(where, "must be finite")
        return float(value)
    if isinstance(ref, str):
        if not isinstance(value, str):
            raise ConfigError(where, f"expected a string, got {value!r}")
        return value
    return value


def _set_path(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for i, k in enumerate(keys[:-1]):
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(".".join(keys[: i + 1]), "is not a mapping")
    node[keys[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(text, "override must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(key, f"cannot parse value {raw!r}") from exc
    return key.strip(), value


@dataclass(frozen=True)
class Scenario:
    raw: dict
    device_s: DeviceParams
    device_r: DeviceParams
    cal_s: ConversionCalibration
    cal_r: ConversionCalibration
    channel: ChannelSpec
    budget: EfficiencyBudget
    experiment: str
    seed: int
    output_dir: Path

    @property
    def xi2(self) -> complex:
        return complex(np.sqrt(self.raw["pumps"]["xi2_sq"]))

    @property
    def dt(self) -> float:
        return self.raw["wavepacket"]["dt_ns"] * 1e-9

    @property
    def duration(self) -> float:
        return self.raw["wavepacket"]["duration_us"] * 1e-6

    @property
    def carrier_detuning(self) -> float:
        return self.raw["wavepacket"]["carrier_detuning_over_2pi_mhz"] * MHZ

    @property
    def code(self) -> str:
        return self.raw["code"]

    @property
    def wavepacket(self) -> WavepacketSpec:
        """The released packet for the configured truncation and energy fraction."""
        return default_wavepacket(self.duration, self.raw["wavepacket"]["energy_fraction"],
                                  self.budget.eta_trunc_s, 1.0, self.carrier_detuning, self.dt)

    def node_kwargs(self) -> dict:
        return {
            "sender_params": self.device_s, "receiver_params": self.device_r,
            "sender_cal": self.cal_s, "receiver_cal": self.cal_r,
            "duration": self.duration, "dt": self.dt,
            "carrier_detuning": self.carrier_detuning, "xi2": self.xi2,
        }


def _build_device(d: dict, name: str, path: str, decay: bool) -> DeviceParams:
    for key in ("t1_a_us", "t1_b_us", "t2r_a_us", "t1_t_us", "t2r_t_us"):
        if d[key] <= 0:
            raise ConfigError(f"{path}.{key}", "must be positive")
    if not 0 <= d["p_excite_static"] <= 1:
        raise ConfigError(f"{path}.p_excite_static", "must lie in [0, 1]")
    return DeviceParams(
        omega_a=d["omega_a_over_2pi_mhz"] * MHZ, omega_b=d["omega_b_over_2pi_mhz"] * MHZ,
        omega_t=d["omega_t_over_2pi_mhz"] * MHZ,
        chi_ab=d["chi_ab_over_2pi_khz"] * KHZ, chi_at=d["chi_at_over_2pi_mhz"] * MHZ,
        chi_bt=d["chi_bt_over_2pi_mhz"] * MHZ, chi_aa=d["chi_aa_over_2pi_khz"] * KHZ,
        chi_bb=d["chi_bb_over_2pi_khz"] * KHZ, chi_tt=d["chi_tt_over_2pi_mhz"] * MHZ,
        kappa_out=1.0 / (d["t1_b_us"] * 1e-6),
        kappa_0=1.0 / (d["t1_a_us"] * 1e-6) if decay else 0.0,
        T1_a=d["t1_a_us"] * 1e-6, T2R_a=d["t2r_a_us"] * 1e-6, T1_t=d["t1_t_us"] * 1e-6,
        T2R_t=d["t2r_t_us"] * 1e-6, p_excite_static=d["p_excite_static"], n_thermal_a=d["n_thermal_a"],
        name=name,
    )


def build_scenario(raw_override: dict | None = None, overrides: list[str] | None = None) -> Scenario:
    tree = copy.deepcopy(raw_override or {})
    if not isinstance(tree, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    for text in overrides or []:
        key, value = parse_override(text)
        _set_path(tree, key, value)
    raw = _merge(DEFAULTS, tree)

    if raw["experiment"] not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {raw['experiment']!r}; choose from {list(EXPERIMENTS)}")
    if raw["code"] not in ("fock", "binomial"):
        raise ConfigError("code", "must be 'fock' or 'binomial'")
    if raw["process"]["code"] not in ("fock", "binomial"):
        raise ConfigError("process.code", "must be 'fock' or 'binomial'")
    if raw["state"]["kind"] not in ("fock", "coherent"):
        raise ConfigError("state.kind", "must be 'fock' or 'coherent'")
    decay = raw["device"]["intrinsic_decay"]
    dev_s = _build_device(raw["device"]["sender"], "sender", "device.sender", decay)
    dev_r = _build_device(raw["device"]["receiver"], "receiver", "device.receiver", decay)

    pumps = raw["pumps"]
    if pumps["xi_sq_max"] <= 0:
        raise ConfigError("pumps.xi_sq_max", "must be positive")
    if not 0 < pumps["xi2_sq"] <= pumps["xi_sq_max"]:
        raise ConfigError("pumps.xi2_sq", "must lie in (0, xi_sq_max]")
    cals = []
    for dev in (dev_s, dev_r):
        cal = ConversionCalibration.from_device(dev, pumps["g_max_over_2pi_khz"] * KHZ, pumps["xi_sq_max"])
        cals.append(cal if pumps["stark_shifts"] else cal.without_stark())

    for key, value in raw["budget"].items():
        if not 0 <= value <= 1:
            raise ConfigError(f"budget.{key}", "must lie in [0, 1]")
    for key in ("eta_trunc_s", "eta_trunc_r"):
        if not 0 < raw["budget"][key] < 1:
            raise ConfigError(f"budget.{key}", "must lie strictly between 0 and 1")
    ch = raw["channel"]
    if not 0 <= ch["eta_tx"] <= 1:
        raise ConfigError("channel.eta_tx", "must lie in [0, 1]")
    channel = ChannelSpec(ch["eta_tx"], ch["delay_ns"] * 1e-9, ch["circulator_ideal"])
    budget = EfficiencyBudget(eta_tx=ch["eta_tx"], **raw["budget"])

    wp = raw["wavepacket"]
    if wp["duration_us"] <= 0 or wp["dt_ns"] <= 0:
        raise ConfigError("wavepacket", "duration_us and dt_ns must be positive")
    n = wp["duration_us"] * 1e3 / wp["dt_ns"]
    if abs(n - round(n)) > 1e-6 or round(n) < 4:
        raise ConfigError("wavepacket.dt_ns", "must divide the duration into at least four steps")
    if not 0 < wp["energy_fraction"] <= 1:
        raise ConfigError("wavepacket.energy_fraction", "must lie in (0, 1]")
    sw = raw["sweep"]
    if not 0 < sw["eta_min"] < sw["eta_max"] <= 1:
        raise ConfigError("sweep", "need 0 < eta_min < eta_max <= 1")
    if sw["points"] < 2:
        raise ConfigError("sweep.points", "need at least two points")
    if sw["workers"] < 1:
        raise ConfigError("sweep.workers", "must be at least 1")
    if raw["state"]["dim"] < 2:
        raise ConfigError("state.dim", "must be at least 2")
    if raw["state"]["kind"] == "fock" and not 0 <= raw["state"]["n"] < raw["state"]["dim"]:
        raise ConfigError("state.n", "must lie in [0, dim)")
    for key in ("correct.eta", "process.eta", "tomo.eta"):
        sec, name = key.split(".")
        if not 0 < raw[sec][name] <= 1:
            raise ConfigError(key, "must lie in (0, 1]")
    if raw["tomo"]["trials"] < 1:
        raise ConfigError("tomo.trials", "must be at least 1")
    if raw["tomo"]["points"] ** 2 < raw["tomo"]["dim"] ** 2:
        raise ConfigError("tomo.points", "grid too small for the reconstruction dimension")

    return Scenario(raw, dev_s, dev_r, cals[0], cals[1], channel, budget, raw["experiment"], raw["seed"],
                    Path(raw["output_dir"]))


def load_scenario(path: str | Path | None, overrides: list[str] | None = None) -> Scenario:
    tree: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc}") from exc
        try:
            tree = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("--config", f"invalid YAML: {exc}") from exc
    return build_scenario(tree, overrides)

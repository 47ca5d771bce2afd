"""Run configuration: presets, JSON overlays, and the config hash.

A run is described by one nested key-value document. The two built-in
presets are ``desk`` (small sizes, minutes on a CPU) and ``full``
(full-scale antenna counts and codebook). A user JSON file overlays the
chosen preset key by key; command-line flags overlay both. The sha256
hash of the fully resolved document is stamped into every output file
header.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .channel import ArrayGeometry, BandConfig
from .errors import ConfigurationError
from .model import ModelConfig
from .scene import Box, SceneConfig
from .train import TrainConfig

DESK_PRESET: dict = {
    "seed": 0,
    "scene": {
        "road_length": 200.0,
        "road_width": 20.0,
        "n_sub6_bs": 2,
        "n_mmw_bs": 4,
        # Macro cells sit behind the wall rows at the road ends; their
        # links reach users attenuated whenever a wall cuts the path.
        "sub6_positions": [[0.0, -20.0, 15.0], [200.0, 20.0, 15.0]],
        "mmw_positions": None,
        "sub6_bs_height": 15.0,
        "mmw_bs_height": 6.0,
        "user_grid_spacing": 0.1,
        "user_rows": 8,
        "user_height": 1.5,
        "user_jitter": 0.0,
        # Street canyon: continuous wall rows on both edges with gaps at
        # the mmWave station abscissas. Long sight lines die in the walls,
        # so each user keeps one or two dominant stations and the best
        # station varies smoothly along the road.
        "buildings": [
            [0.0, -14.0, 0.0, 21.0, -10.5, 18.0],
            [29.0, -14.0, 0.0, 121.0, -10.5, 18.0],
            [129.0, -14.0, 0.0, 200.0, -10.5, 18.0],
            [0.0, 10.5, 0.0, 71.0, 14.0, 18.0],
            [79.0, 10.5, 0.0, 171.0, 14.0, 18.0],
            [179.0, 10.5, 0.0, 200.0, 14.0, 18.0],
        ],
    },
    "sub6_band": {
        "carrier_frequency": 3.5e9,
        "bandwidth": 2.0e7,
        "n_subcarriers_total": 1024,
        "sampling_factor": 1,
        "subcarrier_limit": 16,
        "tx_power": 1.0,
        "noise_variance": 1.0,
        "blocked_attenuation_db": 20.0,
    },
    "mmw_band": {
        "carrier_frequency": 2.8e10,
        "bandwidth": 5.0e8,
        "n_subcarriers_total": 1024,
        "sampling_factor": 1,
        "subcarrier_limit": 16,
        "tx_power": 1.0,
        "noise_variance": 1.0,
        "blocked_attenuation_db": None,
    },
    "sub6_array": {"n_elements": 4, "spacing_wavelengths": 0.5},
    "mmw_array": {"n_elements": 32, "spacing_wavelengths": 0.5},
    "codebook": {"n_beams": 16},
    "snr": {"scale": "auto", "target_snr_db": 30.0},
    "target_scaling": "per_sample",
    "model": {
        "conv1_filters": 32,
        "conv2_filters": 64,
        "base_dense": [128, 256],
        "branch_dense": [128, 64],
        "concat_dense": 128,
    },
    "train": {
        "epochs": 100,
        "batch_size": 32,
        "learning_rate": 1e-3,
        "optimizer": "adam",
        "split_ratio": 0.8,
        "training_data_fraction": 1.0,
        "lambda_cls": 1.0,
        "lambda_reg": 4.0,
        "lr_decay_epoch": 80,
        "lr_decay_factor": 0.1,
    },
    "eval": {"beams": [1, 3]},
}

# Full-scale sizes: 8 small cells with 256-element arrays and a 64-beam
# codebook, 16-element macro arrays, 0.5 GHz mmWave bandwidth against
# 20 MHz sub-6GHz, 1024 subcarriers with the leading 64 synthesized.
FULL_PRESET: dict = copy.deepcopy(DESK_PRESET)
FULL_PRESET["scene"].update({
    "road_length": 400.0,
    "n_mmw_bs": 8,
    "user_grid_spacing": 0.5,
    "sub6_positions": [[0.0, -20.0, 15.0], [400.0, 20.0, 15.0]],
    "buildings": [
        [0.0, -14.0, 0.0, 21.0, -10.5, 18.0],
        [29.0, -14.0, 0.0, 121.0, -10.5, 18.0],
        [129.0, -14.0, 0.0, 221.0, -10.5, 18.0],
        [229.0, -14.0, 0.0, 321.0, -10.5, 18.0],
        [329.0, -14.0, 0.0, 400.0, -10.5, 18.0],
        [0.0, 10.5, 0.0, 71.0, 14.0, 18.0],
        [79.0, 10.5, 0.0, 171.0, 14.0, 18.0],
        [179.0, 10.5, 0.0, 271.0, 14.0, 18.0],
        [279.0, 10.5, 0.0, 371.0, 14.0, 18.0],
        [379.0, 10.5, 0.0, 400.0, 14.0, 18.0],
    ],
})
FULL_PRESET["sub6_band"]["subcarrier_limit"] = 64
FULL_PRESET["mmw_band"]["subcarrier_limit"] = 64
FULL_PRESET["sub6_array"]["n_elements"] = 16
FULL_PRESET["mmw_array"]["n_elements"] = 256
FULL_PRESET["codebook"]["n_beams"] = 64

PRESETS = {"desk": DESK_PRESET, "full": FULL_PRESET}

_SECTION_KEYS = {
    "seed": None,
    "scene": set(DESK_PRESET["scene"]),
    "sub6_band": set(DESK_PRESET["sub6_band"]),
    "mmw_band": set(DESK_PRESET["mmw_band"]),
    "sub6_array": set(DESK_PRESET["sub6_array"]),
    "mmw_array": set(DESK_PRESET["mmw_array"]),
    "codebook": set(DESK_PRESET["codebook"]),
    "snr": set(DESK_PRESET["snr"]),
    "target_scaling": None,
    "model": set(DESK_PRESET["model"]),
    "train": set(DESK_PRESET["train"]),
    "eval": set(DESK_PRESET["eval"]),
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _validate_keys(raw: dict) -> None:
    for key, value in raw.items():
        if key not in _SECTION_KEYS:
            raise ConfigurationError(f"unknown config key {key!r}")
        allowed = _SECTION_KEYS[key]
        if allowed is not None:
            if not isinstance(value, dict):
                raise ConfigurationError(f"config section {key!r} must be a table")
            for sub in value:
                if sub not in allowed:
                    raise ConfigurationError(f"unknown config key {key}.{sub}")


def config_hash(raw: dict) -> str:
    """Short stable digest of the fully resolved config document."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class RunConfig:
    """Fully resolved run configuration.

    Cross-section consistency (station counts, beam counts, feature
    width) holds by construction: the model section only carries layer
    widths, while its input/output sizes derive from the scene and
    codebook sections.
    """

    def __init__(self, raw: dict):
        _validate_keys(raw)
        self.raw = raw
        self.hash = config_hash(raw)
        if raw["target_scaling"] not in ("per_sample", "global"):
            raise ConfigurationError(
                f"target_scaling must be per_sample or global, "
                f"got {raw['target_scaling']!r}"
            )
        scale = raw["snr"]["scale"]
        if scale != "auto" and (not isinstance(scale, (int, float)) or scale <= 0):
            raise ConfigurationError("snr.scale must be 'auto' or a positive number")
        # Build everything eagerly so bad values fail at load time.
        self.scene = self._scene_config()
        self.sub6_band = self._band("sub6_band", "sub6")
        self.mmw_band = self._band("mmw_band", "mmw")
        self.sub6_array = self._array("sub6_array")
        self.mmw_array = self._array("mmw_array")
        self.n_beams = int(raw["codebook"]["n_beams"])
        if self.n_beams < 1:
            raise ConfigurationError("codebook.n_beams must be >= 1")
        self.model = self._model_config()
        self.train = self._train_config()
        beams = raw["eval"]["beams"]
        if (not isinstance(beams, list) or not beams
                or any(not 1 <= int(b) <= self.n_beams for b in beams)):
            raise ConfigurationError(
                f"eval.beams must be a non-empty list within 1..{self.n_beams}"
            )
        self.eval_beams = [int(b) for b in beams]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def _scene_config(self) -> SceneConfig:
        s = self.raw["scene"]
        buildings = tuple(Box.from_bounds(*b) for b in s["buildings"])

        def positions(key):
            if s[key] is None:
                return None
            return tuple(tuple(float(c) for c in p) for p in s[key])

        return SceneConfig(
            road_length=float(s["road_length"]),
            road_width=float(s["road_width"]),
            n_sub6_bs=int(s["n_sub6_bs"]),
            n_mmw_bs=int(s["n_mmw_bs"]),
            sub6_positions=positions("sub6_positions"),
            mmw_positions=positions("mmw_positions"),
            sub6_bs_height=float(s["sub6_bs_height"]),
            mmw_bs_height=float(s["mmw_bs_height"]),
            user_grid_spacing=float(s["user_grid_spacing"]),
            user_rows=int(s["user_rows"]),
            user_height=float(s["user_height"]),
            buildings=buildings,
            user_jitter=float(s["user_jitter"]),
            rng_seed=self.seed,
        )

    def _band(self, section: str, name: str) -> BandConfig:
        b = self.raw[section]
        att = b["blocked_attenuation_db"]
        return BandConfig(
            name=name,
            carrier_frequency=float(b["carrier_frequency"]),
            bandwidth=float(b["bandwidth"]),
            n_subcarriers_total=int(b["n_subcarriers_total"]),
            sampling_factor=int(b["sampling_factor"]),
            subcarrier_limit=int(b["subcarrier_limit"]),
            tx_power=float(b["tx_power"]),
            noise_variance=float(b["noise_variance"]),
            blocked_attenuation_db=None if att is None else float(att),
        )

    def _array(self, section: str) -> ArrayGeometry:
        a = self.raw[section]
        return ArrayGeometry(n_elements=int(a["n_elements"]),
                             spacing_wavelengths=float(a["spacing_wavelengths"]))

    def _model_config(self) -> ModelConfig:
        m = self.raw["model"]
        return ModelConfig(
            n_sub6_bs=self.scene.n_sub6_bs,
            n_mmw_bs=self.scene.n_mmw_bs,
            n_beams=self.n_beams,
            conv1_filters=int(m["conv1_filters"]),
            conv2_filters=int(m["conv2_filters"]),
            base_dense=tuple(int(v) for v in m["base_dense"]),
            branch_dense=tuple(int(v) for v in m["branch_dense"]),
            concat_dense=int(m["concat_dense"]),
            rng_seed=self.seed + 1,
        )

    def _train_config(self) -> TrainConfig:
        t = self.raw["train"]
        return TrainConfig(
            epochs=int(t["epochs"]),
            batch_size=int(t["batch_size"]),
            learning_rate=float(t["learning_rate"]),
            optimizer=str(t["optimizer"]),
            split_ratio=float(t["split_ratio"]),
            training_data_fraction=float(t["training_data_fraction"]),
            lambda_cls=float(t["lambda_cls"]),
            lambda_reg=float(t["lambda_reg"]),
            lr_decay_epoch=int(t["lr_decay_epoch"]),
            lr_decay_factor=float(t["lr_decay_factor"]),
            rng_seed=self.seed + 2,
        )


def load_run_config(preset: str = "desk", config_path=None,
                    seed: int | None = None) -> RunConfig:
    """Resolve preset -> optional JSON overlay -> optional seed override."""
    if preset not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"
        )
    raw = copy.deepcopy(PRESETS[preset])
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                overlay = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{config_path}: invalid JSON: {exc}") from exc
        if not isinstance(overlay, dict):
            raise ConfigurationError(f"{config_path}: config must be a JSON object")
        raw = _deep_merge(raw, overlay)
    if seed is not None:
        raw["seed"] = int(seed)
    return RunConfig(raw)

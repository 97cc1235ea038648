"""Serialization: schema-validated JSON payloads, CSV tables, record files.

Every JSON payload the package emits is validated against a schema file
shipped in `cvbell/schemas/` before it is written, and serialization is
canonical -- sorted keys, repr-precision floats, trailing newline -- so a
rerun with the same config and seed produces byte-identical files.
"""

from __future__ import annotations

import functools
import importlib.resources
import json
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd

from .analysis import BellEstimate
from .correlations import BellAngles, RTable
from .errors import ConfigError, MissingSetting
from .fitting import FitResult
from .sampler import (
    HomodyneRecordSet,
    NoiseConfig,
    RecordBlock,
    four_settings,
)

RECORDS_FORMAT = "cvbell-records-v1"
_DETECTOR_COLUMNS = ["a_plus", "a_minus", "b_plus", "b_minus"]
_ANGLE_KEYS = ("theta_a", "theta_a_prime", "theta_b", "theta_b_prime")


@functools.cache
def load_schema(name: str) -> dict:
    """A schema shipped with the package, by stem ("results", "estimate", ...)."""
    resource = importlib.resources.files("cvbell.schemas") / f"{name}.schema.json"
    return json.loads(resource.read_text())


def validate_payload(payload: dict, schema_name: str) -> None:
    """Validate a payload against a shipped schema (raises on mismatch)."""
    jsonschema.validate(payload, load_schema(schema_name))


def dumps_json(payload: dict) -> str:
    """Canonical JSON text: sorted keys, indent 2, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_json(payload: dict, schema_name: str, path: Path | str | None) -> str:
    """Validate and serialize a payload; write it when a path is given.

    Returns the serialized text either way, so callers can print it.
    """
    validate_payload(payload, schema_name)
    text = dumps_json(payload)
    if path is not None:
        Path(path).write_text(text)
    return text


def write_csv(path: Path | str, columns: dict[str, np.ndarray]) -> None:
    """Write named columns as CSV with %.12g floats (deterministic)."""
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.12g")


def rtable_to_dict(table: RTable) -> dict:
    return {
        "r_pp": table.r_pp,
        "r_mm": table.r_mm,
        "r_pm": table.r_pm,
        "r_mp": table.r_mp,
        "n_clamped": table.n_clamped,
    }


def rtable_from_dict(data: dict) -> RTable:
    return RTable(
        r_pp=float(data["r_pp"]),
        r_mm=float(data["r_mm"]),
        r_pm=float(data["r_pm"]),
        r_mp=float(data["r_mp"]),
        n_clamped=int(data.get("n_clamped", 0)),
    )


def angles_to_dict(angles: BellAngles) -> dict:
    return {key: getattr(angles, key) for key in _ANGLE_KEYS}


def estimate_to_dict(estimate: BellEstimate, config_echo: dict | None = None) -> dict:
    """JSON payload for a bootstrap estimate (schema: estimate)."""
    payload = {
        "b_mean": estimate.b_mean,
        "b_std": estimate.b_std,
        "sigma_above_2": estimate.sigma_above_2,
        "e_values": list(estimate.e_values),
        "r_tables": [rtable_to_dict(t) for t in estimate.r_tables],
        "angles": angles_to_dict(estimate.angles),
        "n_boot": estimate.n_boot,
        "n_rejected": estimate.n_rejected,
        "n_samples": estimate.n_samples,
        "seed": estimate.seed,
    }
    if config_echo is not None:
        payload["config"] = config_echo
    return payload


def fit_result_to_dict(result: FitResult, init: tuple | None = None) -> dict:
    """JSON payload for a fit result (schema: fit_result)."""
    payload = {
        "eta": result.eta,
        "epsilon": result.epsilon,
        "v_sqz": result.v_sqz,
        "v_asqz": result.v_asqz,
        "residual": result.residual,
        "converged": result.converged,
        "physical": result.physical,
        "inferred_squeezing_db": result.inferred_squeezing_db,
        "n_iter": result.n_iter,
        "best_start": result.best_start,
    }
    if result.trace is not None:
        payload["trace"] = list(result.trace)
    if init is not None:
        payload["init"] = {
            "eta": init[0], "epsilon": init[1], "v_sqz": init[2], "v_asqz": init[3],
        }
    return payload


def load_fit_input(path: Path | str) -> tuple[list[tuple[tuple[float, float], RTable]], tuple | None]:
    """Read and validate a fit-input tables file.

    Accepts either a dedicated fit-input payload or a full `simulate`
    results payload (whose angle_pairs and r_tables are used directly).
    Returns (measured pairs for `fitting.fit`, optional init tuple).

    Raises:
        ConfigError: on malformed JSON or schema violations.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"tables file is not valid JSON: {exc}") from exc
    try:
        validate_payload(data, "fit_input")
    except jsonschema.ValidationError as fit_exc:
        try:
            validate_payload(data, "results")
        except jsonschema.ValidationError:
            raise ConfigError(
                f"tables file fails schema: {fit_exc.message}"
            ) from fit_exc
    if len(data["angle_pairs"]) != len(data["r_tables"]):
        raise ConfigError("angle_pairs and r_tables must have equal length")
    measured = [
        ((float(pair[0]), float(pair[1])), rtable_from_dict(table))
        for pair, table in zip(data["angle_pairs"], data["r_tables"])
    ]
    init = None
    if "init" in data:
        raw = data["init"]
        init = (raw["eta"], raw["epsilon"], raw["v_sqz"], raw["v_asqz"])
    return measured, init


def _records_file_name(pair_index: int, setting_id: str) -> str:
    return f"records_pair{pair_index}_{setting_id}.csv"


def _period_index(n: int, period_len: int) -> np.ndarray:
    n_periods = max(1, n // period_len)
    return np.minimum(np.arange(n) // period_len, n_periods - 1)


def write_records(
    directory: Path | str,
    record_sets: list[HomodyneRecordSet],
    config_echo: dict,
) -> Path:
    """Write four record sets and their metadata into a directory.

    One CSV per (angle pair, setting) holds the signal, shot, and dark
    blocks stacked with a `block` discriminator column; `metadata.json`
    carries angles, noise parameters, file map, and the config echo.

    Returns the metadata path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if len(record_sets) != 4:
        raise ValueError("expected record sets for exactly four angle pairs")

    angles = BellAngles(
        theta_a=record_sets[0].theta_a,
        theta_b=record_sets[0].theta_b,
        theta_a_prime=record_sets[1].theta_a,
        theta_b_prime=record_sets[1].theta_b,
    )
    first = record_sets[0].blocks[0]
    pairs_meta = []
    for pair_index, rs in enumerate(record_sets):
        files = {}
        for block in rs.blocks:
            name = _records_file_name(pair_index, block.setting.id)
            files[block.setting.id] = name
            frames = []
            for kind, arr in (
                ("signal", block.signal),
                ("shot", block.shot),
                ("dark", block.dark),
            ):
                frame = pd.DataFrame(np.asarray(arr), columns=_DETECTOR_COLUMNS)
                frame.insert(0, "block", kind)
                frame.insert(1, "setting", block.setting.id)
                frame.insert(
                    2, "chop_period", _period_index(arr.shape[0], block.chop_period)
                )
                frames.append(frame)
            pd.concat(frames, ignore_index=True).to_csv(
                directory / name, index=False, float_format="%.12g"
            )
        pairs_meta.append(
            {
                "index": pair_index,
                "theta_a": rs.theta_a,
                "theta_b": rs.theta_b,
                "files": files,
            }
        )

    noise_meta = {
        "dark_clearance_db": float(config_echo["dark_clearance_db"]),
        "drift_fraction": float(config_echo["drift_fraction"]),
        "chop_period": int(first.chop_period),
    }
    metadata = {
        "format": RECORDS_FORMAT,
        "seed": record_sets[0].seed,
        "n_samples": first.n_samples,
        "normalized": record_sets[0].normalized,
        "noise": noise_meta,
        "angles": angles_to_dict(angles),
        "pairs": pairs_meta,
        "config": config_echo,
    }
    meta_path = directory / "metadata.json"
    write_json(metadata, "record_metadata", meta_path)
    return meta_path


def read_records(
    directory: Path | str,
) -> tuple[list[HomodyneRecordSet], dict]:
    """Read record sets written by `write_records`.

    Returns (record sets in angle-pair order, metadata dict).

    Raises:
        ConfigError: on a missing or invalid metadata file.
        MissingSetting: when a setting's records file is absent.
    """
    directory = Path(directory)
    meta_path = directory / "metadata.json"
    if not meta_path.exists():
        raise ConfigError(f"no metadata.json in {directory}")
    try:
        metadata = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"metadata.json is not valid JSON: {exc}") from exc
    try:
        validate_payload(metadata, "record_metadata")
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"metadata.json fails schema: {exc.message}") from exc

    settings = {s.id: s for s in four_settings()}
    chop_period = int(metadata["noise"]["chop_period"])
    seed = int(metadata["seed"])
    normalized = bool(metadata["normalized"])

    record_sets = []
    for pair_meta in sorted(metadata["pairs"], key=lambda p: p["index"]):
        blocks = []
        for setting_id in ("S1", "S2", "S3", "S4"):
            file_name = pair_meta["files"][setting_id]
            file_path = directory / file_name
            if not file_path.exists():
                raise MissingSetting(
                    f"records file {file_name} for setting {setting_id} "
                    f"(pair {pair_meta['index']}) is missing"
                )
            frame = pd.read_csv(file_path)
            parts = {}
            for kind in ("signal", "shot", "dark"):
                rows = frame[frame["block"] == kind]
                parts[kind] = np.ascontiguousarray(
                    rows[_DETECTOR_COLUMNS].to_numpy(dtype=np.float64)
                )
            blocks.append(
                RecordBlock(
                    setting=settings[setting_id],
                    signal=parts["signal"],
                    shot=parts["shot"],
                    dark=parts["dark"],
                    gain_trace=None,
                    chop_period=chop_period,
                    seed=seed,
                    normalized=normalized,
                )
            )
        record_sets.append(
            HomodyneRecordSet(
                blocks=tuple(blocks),
                theta_a=float(pair_meta["theta_a"]),
                theta_b=float(pair_meta["theta_b"]),
                seed=seed,
                stream=int(pair_meta["index"]),
            )
        )
    return record_sets, metadata


def noise_config_from_metadata(metadata: dict) -> NoiseConfig:
    """Reconstruct the noise model recorded in a metadata file."""
    noise = metadata["noise"]
    return NoiseConfig(
        dark_clearance_db=float(noise["dark_clearance_db"]),
        drift_fraction=float(noise["drift_fraction"]),
        chop_period=int(noise["chop_period"]),
    )

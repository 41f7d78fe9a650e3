"""Persisted artifact schemas: CSV files and JSON manifests.

Every CSV starts with a versioned comment line ``# ddspectro <name> v1``
followed by a header row. Readers validate the header and report malformed
rows with their line number. Frequencies are angular (rad/s) everywhere; the
``--hz`` CLI flag converts on output only.

Schemas
-------
decay-curve v1      time_s, signal, sigma
rate-set v1         n, tau_s, R_per_s, sigma_R, r_squared
spectrum v1         j, omega_rad_per_s, S, sigma_S, method
harmonic-weights v1 k, A_k_sq
tabulated-model v1  omega_rad_per_s, S
trajectory v1       time_s, E_rad_per_s (debug export)
manifest v1         JSON object with schema, command, config, outputs
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import SchemaError
from .simulate import DecayCurve
from .spectro import RateSet, SpectrumEstimate, TailFit

MANIFEST_SCHEMA = "ddspectro manifest v1"
MANIFEST_NAME = "manifest.json"


def _write_rows(path, schema: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# ddspectro {schema}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _fmt(value: float) -> str:
    if np.isnan(value):
        return "nan"
    return repr(float(value))


def _read_rows(path, schema: str, header: list[str]):
    """Yield (line_number, fields) for each data row, validating the framing."""
    path = Path(path)
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(f"# ddspectro {schema}"):
        raise SchemaError(
            f"expected a '# ddspectro {schema}' header line", path=str(path), line=1
        )
    reader = csv.reader(lines[1:])
    try:
        head = next(reader)
    except StopIteration:
        raise SchemaError("missing header row", path=str(path), line=2) from None
    if [h.strip() for h in head] != header:
        raise SchemaError(
            f"header {head} does not match schema columns {header}", path=str(path), line=2
        )
    for offset, fields in enumerate(reader, start=3):
        if not fields:
            continue
        if len(fields) != len(header):
            raise SchemaError(
                f"expected {len(header)} fields, found {len(fields)}",
                path=str(path),
                line=offset,
            )
        yield offset, fields


def _parse_float(value: str, path, line, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SchemaError(
            f"column {column!r}: {value!r} is not a number", path=str(path), line=line
        ) from None


def write_decay_curve(path, curve: DecayCurve) -> None:
    rows = (
        (_fmt(t), _fmt(s), _fmt(g))
        for t, s, g in zip(curve.times, curve.signal, curve.sigma)
    )
    _write_rows(path, "decay-curve v1", ["time_s", "signal", "sigma"], rows)


def read_decay_curve(path, tau: float, cycle_length: float, engine: str) -> DecayCurve:
    """Load a curve CSV; geometry comes from the suite manifest."""
    times, signal, sigma = [], [], []
    for line, fields in _read_rows(path, "decay-curve v1", ["time_s", "signal", "sigma"]):
        times.append(_parse_float(fields[0], path, line, "time_s"))
        signal.append(_parse_float(fields[1], path, line, "signal"))
        sigma.append(_parse_float(fields[2], path, line, "sigma"))
    return DecayCurve(
        times=np.array(times),
        signal=np.array(signal),
        sigma=np.array(sigma),
        tau=tau,
        engine=engine,
        cycle_length=cycle_length,
    )


def write_rate_set(path, rates: RateSet) -> None:
    def rows():
        for i, n in enumerate(rates.n):
            fit = rates.fits[i] if i < len(rates.fits) and rates.fits else None
            r_sq = fit.r_squared if fit is not None else np.nan
            yield (
                int(n),
                _fmt(rates.taus[i]),
                _fmt(rates.rates[i]),
                _fmt(rates.sigmas[i]),
                _fmt(r_sq),
            )

    _write_rows(
        path, "rate-set v1", ["n", "tau_s", "R_per_s", "sigma_R", "r_squared"], rows()
    )


def read_rate_set(path) -> RateSet:
    entries = {}
    tau_max = None
    for line, fields in _read_rows(
        path, "rate-set v1", ["n", "tau_s", "R_per_s", "sigma_R", "r_squared"]
    ):
        try:
            n = int(fields[0])
        except ValueError:
            raise SchemaError(
                f"column 'n': {fields[0]!r} is not an integer", path=str(path), line=line
            ) from None
        if n < 1:
            raise SchemaError(f"divisor n must be >= 1, got {n}", path=str(path), line=line)
        if n in entries:
            raise SchemaError(f"duplicate divisor n = {n}", path=str(path), line=line)
        tau = _parse_float(fields[1], path, line, "tau_s")
        rate = _parse_float(fields[2], path, line, "R_per_s")
        sigma = _parse_float(fields[3], path, line, "sigma_R")
        _parse_float(fields[4], path, line, "r_squared")
        entries[n] = (tau, rate, sigma)
        if n == 1:
            tau_max = tau
    if not entries:
        raise SchemaError("no rate rows found", path=str(path))
    m = max(entries)
    if tau_max is None:
        some_n = next(iter(entries))
        tau_max = entries[some_n][0] * some_n
    rates = np.full(m, np.nan)
    sigmas = np.full(m, np.nan)
    for n, (tau, rate, sigma) in entries.items():
        if not np.isclose(tau * n, tau_max, rtol=1e-6):
            raise SchemaError(
                f"row n = {n} has tau = {tau} inconsistent with tau_max = {tau_max}",
                path=str(path),
            )
        rates[n - 1] = rate
        sigmas[n - 1] = sigma
    return RateSet(rates=rates, sigmas=sigmas, tau_max=tau_max)


def write_spectrum(path, estimate: SpectrumEstimate, hz: bool = False) -> None:
    freq_col = "freq_hz" if hz else "omega_rad_per_s"
    scale = 1.0 / (2.0 * np.pi) if hz else 1.0

    def rows():
        for i, j in enumerate(estimate.j):
            yield (
                int(j),
                _fmt(estimate.omega[i] * scale),
                _fmt(estimate.values[i]),
                _fmt(estimate.sigmas[i]),
                estimate.method,
            )

    _write_rows(path, "spectrum v1", ["j", freq_col, "S", "sigma_S", "method"], rows())


def read_spectrum(path) -> SpectrumEstimate:
    rows = []
    method = None
    for line, fields in _read_rows(
        path, "spectrum v1", ["j", "omega_rad_per_s", "S", "sigma_S", "method"]
    ):
        try:
            j = int(fields[0])
        except ValueError:
            raise SchemaError(
                f"column 'j': {fields[0]!r} is not an integer", path=str(path), line=line
            ) from None
        omega = _parse_float(fields[1], path, line, "omega_rad_per_s")
        value = _parse_float(fields[2], path, line, "S")
        sigma = _parse_float(fields[3], path, line, "sigma_S")
        if method is None:
            method = fields[4]
        elif fields[4] != method:
            raise SchemaError("mixed method tags in one file", path=str(path), line=line)
        rows.append((j, omega, value, sigma))
    if not rows:
        raise SchemaError("no spectrum rows found", path=str(path))
    rows.sort()
    js = np.array([r[0] for r in rows])
    omegas = np.array([r[1] for r in rows])
    if not np.array_equal(js, np.arange(1, len(js) + 1)):
        raise SchemaError("spectrum rows must cover j = 1..m without gaps", path=str(path))
    omega_min = omegas[0]
    if not np.allclose(omegas, js * omega_min, rtol=1e-9):
        raise SchemaError(
            "frequencies are not integer multiples of the first row", path=str(path)
        )
    return SpectrumEstimate(
        values=np.array([r[2] for r in rows]),
        sigmas=np.array([r[3] for r in rows]),
        omega_min=float(omega_min),
        method=method,
    )


def read_tabulated_model_csv(path):
    """Read (omega, S) pairs for a tabulated spectral model."""
    omegas, values = [], []
    for line, fields in _read_rows(
        path, "tabulated-model v1", ["omega_rad_per_s", "S"]
    ):
        omegas.append(_parse_float(fields[0], path, line, "omega_rad_per_s"))
        values.append(_parse_float(fields[1], path, line, "S"))
    return np.array(omegas), np.array(values)


def write_tabulated_model_csv(path, omega, values) -> None:
    rows = ((_fmt(w), _fmt(s)) for w, s in zip(omega, values))
    _write_rows(path, "tabulated-model v1", ["omega_rad_per_s", "S"], rows)


def write_trajectory_csv(path, trajectory) -> None:
    """Debug export of a noise trajectory (time_s, E_rad_per_s)."""
    rows = (
        (_fmt(i * trajectory.dt), _fmt(v)) for i, v in enumerate(trajectory.samples)
    )
    _write_rows(path, "trajectory v1", ["time_s", "E_rad_per_s"], rows)


def tail_to_dict(tail: TailFit | None) -> dict | None:
    if tail is None:
        return None
    return {
        "amplitude": tail.amplitude,
        "exponent": tail.exponent,
        "tail_sum": tail.tail_sum,
        "window": list(tail.window),
        "r_squared": tail.r_squared,
        "exponent_sigma": tail.exponent_sigma,
        "onset": tail.onset,
    }


def write_manifest(directory, payload: dict) -> Path:
    """Write the run manifest; deterministic byte-for-byte for equal payloads."""
    path = Path(directory) / MANIFEST_NAME
    payload = {"schema": MANIFEST_SCHEMA, **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise SchemaError("missing manifest.json", path=str(path))
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != MANIFEST_SCHEMA:
        raise SchemaError(
            f"manifest schema {data.get('schema')!r} is not {MANIFEST_SCHEMA!r}",
            path=str(path),
        )
    return data

"""Command-line driver.

    qutrit-metrology run CONFIG [--section.key=value ...]
    qutrit-metrology sweep CONFIG --fields 1e-7,2e-7 [--workers 4]
    qutrit-metrology solve-pulse [--emit-unitaries DIR] [--emit-waveform PATH]
    qutrit-metrology density --base 3 --base 2 --steps 3 --output-dir out
    qutrit-metrology optimize-bias --ec-hz 250e6 --ej-hz 25e9 --asymmetry 0.3 ...

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import analysis, constants, protocol, pulse, transmon
from .qudit import DigitString

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# section -> key -> (type, required)
SCHEMA = {
    "protocol": {
        "base": (int, True),
        "steps": (int, True),
        "tau0": (float, True),
        "field_range": (float, False),
        "mode": (str, False),
        "seed": (int, False),
        "shots": (int, False),
    },
    "device": {
        "E_C": (float, True),
        "E_J_sum": (float, True),
        "asymmetry": (float, True),
        "loop_area": (float, True),
        "flux_ref": (float, True),
        "n_g": (float, False),
    },
    "field": {
        "true_field": (float, False),
        "true_flux": (float, False),
    },
    "pulse": {
        "duration": (float, False),
        "detuning": (float, False),
        "v1": (float, False),
        "v2": (float, False),
        "sample_rate": (float, False),
    },
    "output": {
        "directory": (str, False),
        "prefix": (str, False),
    },
}

# E_C/h = 250 MHz, E_J_sum/h = 25 GHz, a = 0.3, 10 um x 10 um loop
DEFAULT_DEVICE = dict(ec_hz=250e6, ej_hz=25e9, asymmetry=0.3, loop_area=1e-10)
DEFAULT_PULSE_DURATION = 50e-9
DEFAULT_V1 = 1e-3


def fmt(x) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


def _key_lines(text: str):
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines.setdefault((section, m.group(1)), no)
    return lines


def _convert(kind, raw: str, where: str):
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {raw!r}") from None
    return raw.strip().strip('"').strip("'")


def parse_config(text: str, name: str = "<config>", overrides=()):
    """Parse INI text into {section: {key: value}}; unknown keys are errors."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(f"{name}: {exc}") from None
    lines = _key_lines(text)
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    origin = {}
    for section, items in raw.items():
        for key in items:
            origin[(section, key)] = f"{name}:{lines.get((section, key), '?')}"
    for section, key, value in overrides:
        raw.setdefault(section, {})[key] = value
        origin[(section, key)] = f"--{section}.{key}"

    out = {}
    for section, items in raw.items():
        if section not in SCHEMA:
            where = f"{name}:{lines.get((section, None), '?')}" if (section, None) in lines \
                else f"--{section}.*"
            raise ConfigError(f"{where}: unknown section [{section}]")
        out[section] = {}
        for key, value in items.items():
            where = origin[(section, key)]
            if key not in SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
            out[section][key] = _convert(SCHEMA[section][key][0], value, where)
    for section, keys in SCHEMA.items():
        if section not in out:
            continue
        for key, (_, required) in keys.items():
            if required and key not in out[section]:
                anchor = lines.get((section, None), "?")
                raise ConfigError(f"{name}:{anchor}: missing required key {key!r} in [{section}]")
    if "protocol" not in out:
        raise ConfigError(f"{name}: missing [protocol] section")
    return out


def _parse_overrides(extra):
    overrides = []
    for arg in extra:
        m = re.fullmatch(r"--(\w+)\.(\w+)=(.*)", arg)
        if not m:
            raise ConfigError(f"unrecognized argument {arg!r} (expected --section.key=value)")
        overrides.append(m.groups())
    return overrides


@dataclass
class ExperimentConfig:
    protocol: protocol.ProtocolConfig
    shots: int
    device: transmon.TransmonParams | None
    flux_ref: float | None
    true_field: float | None
    true_flux: float | None
    pulse: dict = field(default_factory=dict)
    output_dir: Path = Path(".")
    prefix: str = ""

    @classmethod
    def from_sections(cls, sec, name="<config>"):
        p = sec["protocol"]
        dev = sec.get("device")
        fld = sec.get("field", {})
        out = sec.get("output", {})
        device = flux_ref = None
        field_range = p.get("field_range")
        try:
            if dev is not None:
                device = transmon.TransmonParams(
                    dev["E_C"], dev["E_J_sum"], dev["asymmetry"], dev["loop_area"], dev.get("n_g", 0.0)
                )
                flux_ref = dev["flux_ref"]
                if p["base"] != 3:
                    raise ConfigError(f"{name}: the transmon backend requires protocol.base = 3")
                mu = abs(float(transmon.magnetic_moment(device, flux_ref)))
                if mu == 0:
                    raise ConfigError(f"{name}: magnetic moment vanishes at device.flux_ref")
                # the phase wraps once per 2 pi hbar / (mu tau0); H0 is fixed by the device
                wrap = 2 * np.pi * constants.HBAR / (mu * p["tau0"])
                if field_range is not None and not math.isclose(field_range, wrap, rel_tol=1e-6):
                    raise ConfigError(
                        f"{name}: protocol.field_range = {field_range!r} T conflicts with the device, "
                        f"which sets H0 = 2 pi hbar/(|mu| tau0) = {wrap!r} T; omit field_range"
                    )
                field_range = wrap
            elif "true_flux" in fld:
                raise ConfigError(f"{name}: field.true_flux needs a [device] section")
            if field_range is None:
                raise ConfigError(f"{name}: protocol.field_range is required without a [device]")
            if "true_field" not in fld and "true_flux" not in fld:
                raise ConfigError(f"{name}: [field] needs true_field or true_flux")
            cfg = protocol.ProtocolConfig(
                p["base"], p["steps"], p["tau0"], field_range,
                p.get("mode", "analytic"), p.get("seed", 0),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
        shots = p.get("shots", 1)
        if shots < 1:
            raise ConfigError(f"{name}: protocol.shots must be >= 1")
        return cls(cfg, shots, device, flux_ref, fld.get("true_field"), fld.get("true_flux"),
                   sec.get("pulse", {}), Path(out.get("directory", ".")), out.get("prefix", ""))

    def oracle(self, true_field=None):
        h = self.true_field if true_field is None else true_field
        if self.device is None:
            return protocol.LinearOracle.for_field(h, self.protocol)
        flux = self.true_flux if (true_field is None and self.true_flux is not None) \
            else self.flux_ref + self.device.loop_area * h
        return protocol.transmon_backend(self.device, flux, self.flux_ref)

    def field_estimate(self, digits: DigitString) -> float:
        if self.device is None:
            return protocol.decode_field(digits, self.protocol.h0)
        # linearized inversion; a negative moment maps the phase to (-H0, 0],
        # so fold back into [0, H0) like the ideal backend
        mu = float(transmon.magnetic_moment(self.device, self.flux_ref))
        h = digits.reference_phase() * constants.HBAR / (mu * self.protocol.tau0)
        return h % self.protocol.field_range


def load_config(path, overrides=()):
    text = Path(path).read_text()
    return ExperimentConfig.from_sections(parse_config(text, str(path), overrides), str(path))


def write_records(path, records, d):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["step", "delay_s", "compensation_rad", "outcome"]
                          + [f"p{j}" for j in range(d)]) + "\n")
        for r in records:
            fields = [str(r.step), fmt(r.delay), fmt(r.compensation), str(r.outcome)]
            fields += [fmt(p) for p in r.probabilities]
            fh.write(",".join(fields) + "\n")


def read_records(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        probs = np.array([float(v) for k, v in row.items() if k.startswith("p")])
        out.append(protocol.MeasurementRecord(int(row["step"]), float(row["delay_s"]),
                                              float(row["compensation_rad"]), int(row["outcome"]), probs))
    return out


def _digits_text(digits: DigitString) -> str:
    return "".join(str(x) if x < 10 else f"({x})" for x in digits)


def cmd_run(args, extra) -> int:
    cfg = load_config(args.config, _parse_overrides(extra))
    pc = cfg.protocol
    oracle = cfg.oracle()
    if cfg.shots == 1:
        runs = [protocol.run_fourier_estimation(pc, oracle)]
    else:
        runs = protocol.run_many(pc, oracle, cfg.shots)
    digits, records = runs[0]
    cfg.output_dir.mkdir(parents=True, exist_ok=True)

    def out_path(name):
        return cfg.output_dir / f"{cfg.prefix}{name}"

    write_records(out_path("records.csv"), records, pc.base)

    spec = analysis.PosteriorSpec.from_digits(digits)
    budget = analysis.ResourceBudget.for_protocol(pc.base, pc.steps, pc.tau0)
    result = {
        "base": pc.base,
        "steps": pc.steps,
        "mode": pc.mode,
        "seed": pc.seed,
        "shots": cfg.shots,
        "digits": list(digits),
        "phase_estimate_rad": digits.reference_phase(),
        "field_estimate_t": cfg.field_estimate(digits),
        "true_field_t": cfg.true_field,
        "field_range_t": pc.field_range,
        "posterior_peak": {"phase_rad": spec.reference_phase,
                           "density": analysis.posterior_density(spec.reference_phase, spec)},
        "resource_budget": {"total_time_s": budget.total_time, "steps": budget.steps,
                            "tau0_s": budget.tau0},
        "backend": "ideal" if cfg.device is None else "transmon",
    }
    if cfg.shots > 1:
        with open(out_path("outcomes.csv"), "w", newline="") as fh:
            fh.write("run,digits,field_estimate_t\n")
            for i, (ds, _) in enumerate(runs):
                fh.write(f"{i},{_digits_text(ds)},{fmt(cfg.field_estimate(ds))}\n")
        counts = np.zeros((pc.steps, pc.base), dtype=int)
        for ds, _ in runs:
            for k, x in enumerate(ds):
                counts[k, x] += 1
        result["digit_counts"] = counts.tolist()
    with open(out_path("result.json"), "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"digits {_digits_text(digits)}  field estimate {fmt(result['field_estimate_t'])} T")
    return EXIT_OK


def _parse_fields(args):
    if args.fields:
        return [float(x) for x in args.fields.split(",") if x.strip()]
    if args.field_start is not None and args.field_stop is not None:
        return list(np.linspace(args.field_start, args.field_stop, args.field_count))
    raise ConfigError("sweep needs --fields or --field-start/--field-stop")


def cmd_sweep(args, extra) -> int:
    cfg = load_config(args.config, _parse_overrides(extra))
    fields = _parse_fields(args)
    pc = cfg.protocol
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(pc.seed).spawn(len(fields))]

    def one(i):
        sub = protocol.ProtocolConfig(pc.base, pc.steps, pc.tau0, pc.field_range, pc.mode, seeds[i])
        digits, _ = protocol.run_fourier_estimation(sub, cfg.oracle(fields[i]))
        return digits

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(one, range(len(fields))))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / f"{cfg.prefix}sweep.csv"
    with open(path, "w", newline="") as fh:
        fh.write("index,true_field_t,seed,digits,field_estimate_t,error_t\n")
        for i, (h, digits) in enumerate(zip(fields, results)):
            est = cfg.field_estimate(digits)
            fh.write(f"{i},{fmt(h)},{seeds[i]},{_digits_text(digits)},{fmt(est)},{fmt(est - h)}\n")
    print(f"wrote {len(fields)} runs to {path}")
    return EXIT_OK


def write_unitary(path, U):
    mat = np.asarray(U.matrix)
    d = mat.shape[0]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"re{j},im{j}" for j in range(d)) + "\n")
        for row in mat:
            fh.write(",".join(f"{fmt(z.real)},{fmt(z.imag)}" for z in row) + "\n")


def read_unitary(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(x) for x in row] for row in reader]
    arr = np.array(rows)
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def _device_from_args(args):
    return transmon.TransmonParams.from_frequencies(args.ec_hz, args.ej_hz, args.asymmetry, args.loop_area)


def cmd_solve_pulse(args, extra) -> int:
    if extra:
        raise ConfigError(f"unrecognized arguments {extra}")
    sol = pulse.solve_transcendental()
    r_mod, r_phase, r_delta = sol.residuals()
    print(f"epsilon0 {sol.epsilon:.4f} ({fmt(sol.epsilon)})")
    print(f"xi0 {sol.xi:.4f} ({fmt(sol.xi)})")
    print(f"delta0 {sol.delta:.4f} ({fmt(sol.delta)})")
    print(f"residual_modulus {r_mod:.3e}")
    print(f"residual_phase {r_phase:.3e}")
    print(f"residual_delta {r_delta:.3e}")
    print(f"roots_in_window {len(sol.roots)}")
    u_r, u_p = pulse.protocol_unitaries(sol)
    if args.emit_unitaries:
        out = Path(args.emit_unitaries)
        out.mkdir(parents=True, exist_ok=True)
        write_unitary(out / "U_r.csv", u_r)
        write_unitary(out / "U_p.csv", u_p)
        print(f"wrote {out / 'U_r.csv'} and {out / 'U_p.csv'}")
    if args.emit_waveform:
        device = _device_from_args(args)
        tau_p = args.duration
        detuning = -sol.epsilon / tau_p  # readout branch: eps = detuning * tau_p = -eps0
        v2 = args.v2 if args.v2 is not None else args.v1 / math.sqrt(2)
        settings = pulse.iq_pulse_settings(args.mode, device, args.flux_ref, detuning, args.v1, v2)
        f_max = max(abs(w) for w, _, _ in settings.tones()) / (2 * np.pi)
        rate = args.sample_rate or 5 * f_max
        settings = pulse.IQSettings(settings.a1, settings.a2, settings.omega_lo,
                                    settings.omega_if, settings.phase, sample_rate=rate)
        wf = pulse.synthesize_waveform(settings, tau_p)
        wf.to_csv(args.emit_waveform)
        for w, amp, ph in settings.tones():
            print(f"tone {fmt(w / (2 * np.pi))} Hz amplitude {fmt(amp)} V phase {fmt(ph)}")
        print(f"wrote {len(wf.times)} samples to {args.emit_waveform}")
    return EXIT_OK


def cmd_density(args, extra) -> int:
    if extra:
        raise ConfigError(f"unrecognized arguments {extra}")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(-args.span, args.span, args.points)
    for d in args.base or [3, 2]:
        table = analysis.density_profile(analysis.PosteriorSpec(d, args.steps), grid)
        path = out / f"density_d{d}_K{args.steps}.csv"
        with open(path, "w", newline="") as fh:
            fh.write("delta_phi_rad,density\n")
            for x, y in table:
                fh.write(f"{fmt(x)},{fmt(y)}\n")
        print(f"wrote {path}")
    return EXIT_OK


def read_t2_table(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["phi_wb", "t2_s"]:
                raise ConfigError(f"{path}:1: expected header 'phi_wb,t2_s', got {header}")
            rows = []
            for no, row in enumerate(reader, start=2):
                try:
                    phi, t2 = (float(x) for x in row)
                except ValueError:
                    raise ConfigError(f"{path}:{no}: malformed row {row}") from None
                if t2 <= 0:
                    raise ConfigError(f"{path}:{no}: T2 must be positive")
                rows.append((phi, t2))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if len(rows) < 2:
        raise ConfigError(f"{path}: need at least two rows")
    table = np.array(sorted(rows))
    if np.any(np.diff(table[:, 0]) <= 0):
        raise ConfigError(f"{path}: duplicate flux values")
    return table


def cmd_optimize_bias(args, extra) -> int:
    if extra:
        raise ConfigError(f"unrecognized arguments {extra}")
    try:
        device = _device_from_args(args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    opt = transmon.optimal_bias(device)
    phi0 = constants.FLUX_QUANTUM
    report = {
        "objective": "mu",
        "flux_opt_wb": opt.flux,
        "flux_opt_over_phi0": opt.flux / phi0,
        "mu_opt_j_per_t": opt.moment,
        "mu_opt_bohr": opt.moment / constants.MU_B,
        "tan2_inverse_a_flux_wb": opt.tan2_candidate_flux,
        "tan2_inverse_a_mu_j_per_t": opt.tan2_candidate_moment,
        "sqrt_ej_candidate_flux_wb": opt.sqrt_candidate_flux,
        "small_asymmetry_mu_j_per_t": opt.small_asymmetry_moment,
        "valid": opt.valid,
    }
    t2 = args.t2
    if args.t2_table:
        table = read_t2_table(args.t2_table)

        def score(phi):
            return abs(float(transmon.magnetic_moment(device, phi))) * np.interp(phi, table[:, 0], table[:, 1])

        grid = np.linspace(table[0, 0], table[-1, 0], args.grid_points)
        vals = np.array([score(p) for p in grid])
        i = int(np.argmax(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(lambda p: -score(p), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * phi0})
        best = res.x if -res.fun >= vals[i] else grid[i]
        t2 = float(np.interp(best, table[:, 0], table[:, 1]))
        report.update({
            "objective": "mu_t2",
            "flux_opt_wb": float(best),
            "flux_opt_over_phi0": float(best) / phi0,
            "mu_opt_j_per_t": float(transmon.magnetic_moment(device, best)),
            "mu_opt_bohr": float(transmon.magnetic_moment(device, best)) / constants.MU_B,
            "mu_t2_product": score(best),
        })
    if t2 is not None:
        mu = args.mu_bohr * constants.MU_B if args.mu_bohr else abs(report["mu_opt_j_per_t"])
        report["t2_s"] = t2
        report["mu_used_j_per_t"] = mu
        report["delta_h_t2_t"] = analysis.t2_limited_precision(mu, args.base, t2)
        if args.tau0:
            report["k_max"] = analysis.max_steps(args.base, t2, args.tau0)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _add_device_flags(p):
    p.add_argument("--ec-hz", type=float, default=DEFAULT_DEVICE["ec_hz"], help="E_C / h")
    p.add_argument("--ej-hz", type=float, default=DEFAULT_DEVICE["ej_hz"], help="E_J_sum / h")
    p.add_argument("--asymmetry", type=float, default=DEFAULT_DEVICE["asymmetry"])
    p.add_argument("--loop-area", type=float, default=DEFAULT_DEVICE["loop_area"], help="m^2")


def build_parser():
    parser = argparse.ArgumentParser(prog="qutrit-metrology", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the estimation loop from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the loop over a list of true fields")
    p.add_argument("config")
    p.add_argument("--fields", help="comma-separated true fields (T)")
    p.add_argument("--field-start", type=float)
    p.add_argument("--field-stop", type=float)
    p.add_argument("--field-count", type=int, default=11)
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("solve-pulse", help="solve the readout-pulse constraints")
    p.add_argument("--emit-unitaries", metavar="DIR")
    p.add_argument("--emit-waveform", metavar="PATH")
    p.add_argument("--mode", choices=["readout", "preparation"], default="readout")
    p.add_argument("--flux-ref", type=float, default=0.25 * constants.FLUX_QUANTUM, help="Wb")
    p.add_argument("--duration", type=float, default=DEFAULT_PULSE_DURATION, help="pulse length (s)")
    p.add_argument("--v1", type=float, default=DEFAULT_V1, help="0-1 tone amplitude (V)")
    p.add_argument("--v2", type=float, default=None, help="1-2 tone amplitude (V); default v1/sqrt(2)")
    p.add_argument("--sample-rate", type=float, default=None, help="Hz; default 5x highest tone")
    _add_device_flags(p)
    p.set_defaults(func=cmd_solve_pulse)

    p = sub.add_parser("density", help="emit posterior density profiles")
    p.add_argument("--base", type=int, action="append")
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--points", type=int, default=4001)
    p.add_argument("--span", type=float, default=math.pi, help="half-width of the delta-phi grid")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("optimize-bias", help="find the flux bias maximizing |mu| or mu*T2")
    _add_device_flags(p)
    p.add_argument("--t2-table", help="CSV with header phi_wb,t2_s")
    p.add_argument("--t2", type=float, help="constant T2 (s) for the precision estimate")
    p.add_argument("--mu-bohr", type=float, help="use this moment (Bohr magnetons) for the precision")
    p.add_argument("--tau0", type=float, help="shortest Ramsey delay (s) for the K_max report")
    p.add_argument("--base", type=int, default=3)
    p.add_argument("--grid-points", type=int, default=2001)
    p.set_defaults(func=cmd_optimize_bias)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pulse.SolverError, pulse.InconsistentSolutionError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

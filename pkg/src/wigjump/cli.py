"""Run orchestration: INI config parsing, subcommands, output artifacts.

Config files are flat-sectioned INI text ([potential], [shell], [series],
[observable], [oracle], [beam], [run]); one canonical example per subcommand
ships in run_configs/.  Every output file header records the config hash,
the seed verbatim and the package version.  Files are written to a temp name
and renamed, so interrupted runs never leave truncated outputs.

Exit codes: 0 success, 1 config error, 2 runtime numeric error, 3 IO error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, microcanon, model, observables, oracle, waveprop
from .errors import ConfigError, WigjumpError
from .jumpseries import SeriesConfig
from .series import (atomic_write_text, fmt, per_order_to_csv,
                     spectrum_to_csv, timeseries_from_csv, timeseries_to_csv)

ENV_OUTPUT_DIR = "WIGJUMP_OUTPUT_DIR"
ENV_WORKERS = "WIGJUMP_WORKERS"


def parse_grid(text: str) -> np.ndarray:
    """Either 'start:stop:count' (inclusive linspace) or a comma list."""
    text = text.strip()
    if ":" in text:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.asarray([float(v) for v in text.split(",")], dtype=float)


@dataclass
class RunConfig:
    path: str
    cp: configparser.ConfigParser
    config_hash: str
    seed: int
    workers: int
    output_dir: str
    meta: dict = field(default_factory=dict)

    def section(self, name: str) -> configparser.SectionProxy:
        if name not in self.cp:
            raise ConfigError(f"missing [{name}] section in {self.path}")
        return self.cp[name]

    def header_meta(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed,
                "version": __version__}

    def out(self, name: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, name)


def load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} does not exist")
    with open(path, "rb") as fh:
        raw = fh.read()
    cp = configparser.ConfigParser()
    try:
        cp.read_string(raw.decode())
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    run = cp["run"] if "run" in cp else {}
    seed = int(run.get("seed", 0))
    workers = int(os.environ.get(ENV_WORKERS, run.get("workers", "1")))
    output_dir = os.environ.get(ENV_OUTPUT_DIR,
                                run.get("output_dir", "wigjump-out"))
    return RunConfig(path=path, cp=cp,
                     config_hash=hashlib.sha256(raw).hexdigest()[:12],
                     seed=seed, workers=workers, output_dir=output_dir)


def build_potential(cfg: RunConfig) -> model.PotentialSpec:
    sec = cfg.section("potential")
    kind = sec.get("kind", "double-well")
    if kind == "double-well":
        return model.double_well(
            v0=float(sec.get("v0", 1.0)),
            ratio=float(sec.get("ratio", 0.12)),
            sigma=float(sec.get("sigma", 0.26)),
            sigma_tilde=float(sec.get("sigma_tilde", 2.23)))
    if kind == "harmonic":
        return model.harmonic(omega0=float(sec.get("omega0", 1.0)),
                              mass=float(sec.get("mass", 1.0)))
    if kind == "free":
        return model.free_particle(mass=float(sec.get("mass", 1.0)))
    if kind == "custom-gaussian-sum":
        amps = [float(v) for v in sec.get("amplitudes", "").split(",")]
        widths = [float(v) for v in sec.get("widths", "").split(",")]
        return model.gaussian_sum(amps, widths,
                                  mass=float(sec.get("mass", 1.0)))
    raise ConfigError(f"unknown potential kind {kind!r}")


def build_series_config(cfg: RunConfig) -> SeriesConfig:
    sec = cfg.section("series")
    jump_scale = sec.get("jump_scale", "")
    return SeriesConfig(
        max_order=int(sec.get("max_order", 4)),
        order_ratio=float(sec.get("order_ratio", 0.5)),
        jump_scale=float(jump_scale) if jump_scale else None,
        epsilon_damping=float(sec.get("epsilon_damping", 0.07)),
        budget=int(sec.get("budget", 20000)),
        seed=cfg.seed,
        dt=float(sec.get("dt", 1e-3)),
        match_window=float(sec.get("match_window", 0.05)),
        energy_window=float(sec.get("energy_window", 0.01)),
        chunk_size=int(sec.get("chunk_size", 8192)),
        workers=cfg.workers)


def _shell_energy(cfg: RunConfig, spec) -> float:
    sec = cfg.section("shell")
    if "energy_over_v0" in sec:
        scale = max(abs(a) for a in spec.amplitudes) if spec.amplitudes else 1.0
        return float(sec["energy_over_v0"]) * scale
    return float(sec["energy"])


def _load_shell(cfg: RunConfig):
    sec = cfg.section("shell")
    path = sec.get("samples_file", "")
    if not path:
        raise ConfigError("shell section must point at samples_file "
                          "(run the sample subcommand first)")
    if not os.path.exists(path):
        raise ConfigError(f"shell samples file {path!r} does not exist")
    return microcanon.load_samples(path)


def cmd_sample(cfg: RunConfig) -> int:
    spec = build_potential(cfg)
    sec = cfg.section("shell")
    energy = _shell_energy(cfg, spec)
    kwargs = {}
    if sec.get("burn_in_time"):
        kwargs["burn_in_time"] = float(sec["burn_in_time"])
    if sec.get("stride_time"):
        kwargs["stride_time"] = float(sec["stride_time"])
    ens = microcanon.sample_shell(
        spec, energy, int(sec.get("n_samples", 10000)),
        seed=cfg.seed, dt=float(sec.get("dt", microcanon.DEFAULT_DT)),
        energy_tol=float(sec.get("energy_tol", 1e-8)), **kwargs)
    path = cfg.out(sec.get("samples_name", "shell_samples.txt"))
    microcanon.save_samples(path, ens, spec, extra_meta=cfg.header_meta())
    if len(ens):
        print(f"sample: wrote {len(ens)} samples to {path}")
        print(f"sample: max |H-E| = "
              f"{np.max(np.abs(model.hamiltonian(spec, ens.p, ens.q) - energy)):.3e}; "
              f"left-half fraction = {np.mean(ens.q < 0):.4f}")
    else:
        print(f"sample: wrote empty sample file to {path}")
    return 0


def cmd_correlate(cfg: RunConfig, dump_pieces: str | None = None) -> int:
    spec = build_potential(cfg)
    shell = _load_shell(cfg)
    series_cfg = build_series_config(cfg)
    obs = cfg.section("observable")
    t_grid = parse_grid(obs.get("t_grid", "0:100:101"))
    delta_q = float(obs.get("delta_q", 0.05 * min(spec.widths)
                            if spec.widths else 0.05))
    series = observables.corr_flux_eta(spec, shell.energy, t_grid, shell,
                                       series_cfg, delta_q=delta_q)
    series.meta.update(cfg.header_meta())
    path = cfg.out("corr_flux_eta.csv")
    timeseries_to_csv(series, path)
    per_order_to_csv(series, cfg.out("corr_flux_eta_orders.csv"))
    print(f"correlate: wrote {path} (status {series.meta['status']})")
    if dump_pieces:
        _dump_pieces(spec, shell, series_cfg, t_grid, dump_pieces, cfg)
    return 0


def _dump_pieces(spec, shell, series_cfg, t_grid, path, cfg):
    """Debug dump: rebuilt per-interval endpoints of a few sampled pairs."""
    from . import jumpseries, pairdyn
    t = float(t_grid[-1])
    outcomes = jumpseries.collect_outcomes(
        spec, observables.symbol_phi(
            observables.ObservableSymbol("position"), spec),
        shell.energy, t, shell, series_cfg, n_max=8)
    lines = [f"# {k}: {v}" for k, v in sorted(cfg.header_meta().items())]
    lines.append("sample,tau,leg,p,q")
    for i, out in enumerate(outcomes):
        pair = pairdyn.pair_from_point(shell.p[i % len(shell)],
                                       shell.q[i % len(shell)], t)
        for ev in out.jump_log:
            pair = pairdyn.apply_jump(pair, pairdyn.JumpEvent(
                tau=ev[0], jump=-ev[1], branch=ev[2]))
        for tau, bar, tilde in pairdyn.rebuild_pieces(spec, pair,
                                                      series_cfg.dt):
            lines.append(f"{i},{fmt(tau)},bar,{fmt(bar.p[0])},{fmt(bar.q[0])}")
            lines.append(f"{i},{fmt(tau)},tilde,{fmt(tilde.p[0])},"
                         f"{fmt(tilde.q[0])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def _oracle_from_config(cfg: RunConfig, spec):
    sec = cfg.section("oracle")
    if spec.widths:
        default_half = 6.0 * max(spec.widths)
    else:
        default_half = 12.0
    x_min = float(sec.get("x_min", -default_half))
    x_max = float(sec.get("x_max", default_half))
    n = int(sec.get("n_points", 4096))
    method = sec.get("method", "fgh")
    return oracle.diagonalize(spec, x_min, x_max, n, method=method)


def cmd_spectrum(cfg: RunConfig) -> int:
    spec = build_potential(cfg)
    obs = cfg.section("observable")
    sec = cfg.section("spectrum") if "spectrum" in cfg.cp else {}
    series_file = sec.get("series_file", "") if sec else ""
    if series_file:
        series = timeseries_from_csv(series_file)
        energy = float(series.meta.get("energy"))
    else:
        shell = _load_shell(cfg)
        series_cfg = build_series_config(cfg)
        t_grid = parse_grid(obs.get("t_grid", "0:100:101"))
        delta_q = float(obs.get("delta_q", 0.05 * min(spec.widths)))
        series = observables.corr_flux_eta(spec, shell.energy, t_grid, shell,
                                           series_cfg, delta_q=delta_q)
        energy = shell.energy
    eps = float(obs.get("epsilon", 7.0 / series.t[-1]))
    omega_grid = parse_grid(obs.get("omega_grid", "-3:3:601"))
    spectrum = observables.spectrum_of(series, eps, omega_grid)
    spectrum.meta.update(cfg.header_meta())
    spectrum_to_csv(spectrum, cfg.out("spectrum.csv"))

    eig = _oracle_from_config(cfg, spec)
    lev = eig.energies
    diffs = (lev[None, :] - lev[:, None]).ravel()
    peaks = observables.peak_report(spectrum, diffs)
    observables.write_peak_report(cfg.out("peaks.json"), peaks,
                                  dict(cfg.header_meta(), energy=energy))
    print(f"spectrum: wrote spectrum.csv and peaks.json "
          f"({len(peaks)} peaks)")
    return 0


def cmd_disperse(cfg: RunConfig) -> int:
    spec = build_potential(cfg)
    shell = _load_shell(cfg)
    series_cfg = build_series_config(cfg)
    obs = cfg.section("observable")
    t_grid = parse_grid(obs.get("t_grid", "0:100:101"))
    pos, mom = observables.dispersions(spec, shell.energy, t_grid, shell,
                                       series_cfg)
    pos.meta.update(cfg.header_meta())
    mom.meta.update(cfg.header_meta())
    timeseries_to_csv(pos, cfg.out("dispersion_position.csv"))
    timeseries_to_csv(mom, cfg.out("dispersion_momentum.csv"))
    print("disperse: wrote dispersion_position.csv, dispersion_momentum.csv")
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    spec = build_potential(cfg)
    eig = _oracle_from_config(cfg, spec)
    meta = dict(cfg.header_meta(), **{k: v for k, v in eig.meta.items()})
    lines = [f"# {k}: {v}" for k, v in sorted(meta.items())]
    lines.append("n,energy")
    for i, e in enumerate(eig.energies):
        lines.append(f"{i},{fmt(e)}")
    atomic_write_text(cfg.out("levels.csv"), "\n".join(lines) + "\n")

    sec = cfg.section("oracle")
    obs = cfg.section("observable")
    energy = _shell_energy(cfg, spec) if "shell" in cfg.cp else \
        float(sec.get("energy"))
    eps_e = float(sec.get("eps_e", 0.02))
    t_grid = parse_grid(obs.get("t_grid", "0:200:2001"))
    delta_q = float(obs.get("delta_q", 0.05 * min(spec.widths)
                            if spec.widths else 0.05))
    series = oracle.exact_correlation(eig, energy, eps_e, t_grid, delta_q)
    series.meta.update(cfg.header_meta())
    timeseries_to_csv(series, cfg.out("oracle_corr.csv"))
    print(f"oracle: wrote levels.csv ({len(eig)} states) and oracle_corr.csv")
    return 0


def cmd_beam(cfg: RunConfig) -> int:
    sec = cfg.section("beam")
    dims = int(sec.get("dims", 2))
    profile = waveprop.MediumProfile(
        kind=sec.get("profile", "free"), dims=dims,
        eps0=float(sec.get("eps0", 0.0)),
        width=float(sec.get("width", 1.0)),
        alpha=float(sec.get("alpha", 0.1)),
        center=tuple(float(v) for v in
                     sec.get("center", "0,0").split(",")))
    beam = waveprop.gaussian_beam_wigner(
        waist=float(sec.get("waist", 1.0)),
        center=[float(v) for v in sec.get("start", "0,0").split(",")],
        tilt=[float(v) for v in sec.get("tilt", "0,0").split(",")],
        n_rays=int(sec.get("n_rays", 20000)), seed=cfg.seed, dims=dims)
    z_grid = parse_grid(sec.get("z_grid", "0:100:201"))
    dz = float(sec.get("dz", 0.05))
    moments = waveprop.scan(profile, beam, z_grid, dz)
    waveprop.moments_to_csv(moments, cfg.out("beam_moments.csv"),
                            cfg.header_meta())
    foci = waveprop.find_foci(moments)
    atomic_write_text(cfg.out("foci.json"), json.dumps(
        {"meta": cfg.header_meta(), "foci_z": foci}, indent=2) + "\n")
    print(f"beam: wrote beam_moments.csv and foci.json ({len(foci)} foci)")
    return 0


COMMANDS = {
    "sample": cmd_sample,
    "correlate": cmd_correlate,
    "spectrum": cmd_spectrum,
    "disperse": cmd_disperse,
    "oracle": cmd_oracle,
    "beam": cmd_beam,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wigjump",
        description="momentum-jump phase-space simulator")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="INI run configuration")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker pool size (default: config/run value)")
    parser.add_argument("--output-dir", default=None)
    parser.add_argument("--dump-pieces", default=None, metavar="PATH",
                        help="correlate only: CSV dump of rebuilt trajectory "
                             "pieces for a few samples")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.workers is not None:
            cfg.workers = args.workers
        if args.output_dir is not None:
            cfg.output_dir = args.output_dir
        if args.command == "correlate":
            return cmd_correlate(cfg, dump_pieces=args.dump_pieces)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except (WigjumpError, FloatingPointError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

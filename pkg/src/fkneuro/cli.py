"""Command-line front end.

Subcommands: simulate, sweep, stage, map-suvr, compare, gen-mesh,
gen-graph.  Flags mirror the configuration keys; `--config <path>` loads a
file first and explicit flags override it.  `--show-defaults` prints the
built-in defaults as a config file.
"""

import argparse
import sys

import numpy as np

from . import harness
from .config import SimulationConfig, load_config, serialize_config
from .errors import ConfigError, FkneuroError
from .geometry.connectome import generate_connectome, write_connectome
from .geometry.mesh import generate_structured_mesh, slab_labeler, write_mesh
from .staging import load_clinical_csv, map_clinical_rows
from .harness import write_staging_report
from .trajectory import fmt17, read_series_csv

_CONFIG_FLOATS = [
    "alpha",
    "dt",
    "T",
    "eta0",
    "d_ext",
    "d_axn",
    "seed_value",
    "c_crit",
    "solver_tol",
    "solver_maxit_factor",
    "scale_k",
    "abeta_theta_low",
    "abeta_theta_high",
    "abeta_positivity_cutoff",
    "tau_theta_low",
    "tau_theta_high",
    "tau_gamma",
    "tau_epsilon",
]
_CONFIG_INTS = ["ell", "workers"]
_CONFIG_STRS = [
    "domain",
    "mesh_path",
    "graph_path",
    "atlas_path",
    "atlas_table",
    "seed_regions",
    "output_dir",
]
_CONFIG_BOOLS = ["paper_literal_rhs", "dump_states"]


def _add_config_flags(parser):
    parser.add_argument("--config", help="configuration file (key = value lines)")
    for name in _CONFIG_FLOATS:
        parser.add_argument(
            f"--{name.replace('_', '-')}", dest=name, type=float,
            default=argparse.SUPPRESS,
        )
    for name in _CONFIG_INTS:
        parser.add_argument(
            f"--{name.replace('_', '-')}", dest=name, type=int,
            default=argparse.SUPPRESS,
        )
    for name in _CONFIG_STRS:
        parser.add_argument(
            f"--{name.replace('_', '-')}", dest=name, default=argparse.SUPPRESS
        )
    for name in _CONFIG_BOOLS:
        parser.add_argument(
            f"--{name.replace('_', '-')}", dest=name,
            action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS,
        )


def _config_from_args(args) -> SimulationConfig:
    cfg = SimulationConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    for name in _CONFIG_FLOATS + _CONFIG_INTS + _CONFIG_STRS + _CONFIG_BOOLS:
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg


def _parse_alphas(raw: str):
    if raw == "abeta":
        return list(harness.ABETA_ALPHAS)
    if raw == "tau":
        return list(harness.TAU_ALPHAS)
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"bad alpha list {raw!r}")


def _cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    result = harness.run(cfg)
    for name, path in result.paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    alphas = _parse_alphas(args.alphas)
    summary = harness.sweep(cfg, alphas)
    print(f"summary: {summary}")
    return 0


def _cmd_compare(args) -> int:
    cfg_mesh = load_config(args.config_mesh)
    cfg_graph = load_config(args.config_graph)
    path = harness.compare(cfg_mesh, cfg_graph, args.output_dir)
    print(f"comparison: {path}")
    return 0


def _cmd_stage(args) -> int:
    times, columns = read_series_csv(args.input)
    stage_curves = {
        name[len("avg_") :]: vals
        for name, vals in columns.items()
        if name.startswith("avg_") and name != "avg_global"
    }
    if not stage_curves:
        raise ConfigError(f"{args.input}: no avg_<stage> columns found")
    write_staging_report(args.output, times, stage_curves, args.c_crit)
    print(f"staging: {args.output}")
    return 0


def _cmd_map_suvr(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    abeta_params = cfg.suvr_abeta()
    tau_params = cfg.suvr_tau()
    if args.thresholds:
        with open(args.thresholds) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("region,"):
                    continue
                name, value = line.split(",", 1)
                tau_params.abnormality_thresholds[name.strip()] = float(value)
    rows = load_clinical_csv(args.input)
    try:
        mapped = map_clinical_rows(rows, abeta_params, tau_params)
    except KeyError as exc:
        raise ConfigError(
            f"{exc.args[0]} (supply --thresholds with a region,threshold CSV)"
        )
    with open(args.output, "w") as f:
        f.write("s,phase,s_hat\n")
        for row, phase, s_hat in mapped:
            f.write(f"{fmt17(row.mean_suvr)},{phase},{fmt17(s_hat)}\n")
    print(f"mapping: {args.output}")
    return 0


def _cmd_gen_mesh(args) -> int:
    labeler = slab_labeler(args.slabs, args.extent) if args.slabs > 0 else None
    axon = None
    if args.axon:
        axon = np.array([float(tok) for tok in args.axon.split(",")])
        if axon.size != args.dim:
            raise ConfigError(
                f"axon direction has {axon.size} components, expected {args.dim}"
            )
    mesh = generate_structured_mesh(
        args.dim, args.cells, extent=args.extent, labeler=labeler, axon=axon
    )
    write_mesh(mesh, args.output)
    print(
        f"mesh: {args.output} ({mesh.n_elements} elements, "
        f"{len(mesh.internal_faces)} internal faces)"
    )
    return 0


def _cmd_gen_graph(args) -> int:
    shortcuts = []
    for spec in args.shortcut or []:
        i, j = spec.split(",")
        shortcuts.append((int(i), int(j)))
    conn = generate_connectome(
        args.nodes,
        topology=args.topology,
        tract_count=args.tract_count,
        tract_length=args.tract_length,
        volume=args.volume,
        scale_k=args.scale_k,
        extra_edges=shortcuts or None,
    )
    write_connectome(conn, args.output)
    print(f"graph: {args.output} ({conn.n_nodes} nodes, {len(conn.edges)} edges)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fkneuro",
        description="Protein-spreading simulations on brain meshes and connectomes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a conversion-rate sweep")
    _add_config_flags(p)
    p.add_argument(
        "--alphas",
        required=True,
        help="comma-separated values, or the preset names 'abeta'/'tau'",
    )
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("stage", help="staging report from a trajectory CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--c-crit", dest="c_crit", type=float, default=0.5)
    p.set_defaults(func=_cmd_stage)

    p = sub.add_parser("map-suvr", help="normalize clinical SUVR data")
    _add_config_flags(p)
    p.add_argument("--input", required=True, help="clinical CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--thresholds", help="region,threshold CSV for tau phases")
    p.set_defaults(func=_cmd_map_suvr)

    p = sub.add_parser("compare", help="mesh-vs-graph comparison")
    p.add_argument("--config-mesh", required=True)
    p.add_argument("--config-graph", required=True)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("gen-mesh", help="generate a structured simplicial mesh")
    p.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p.add_argument("--cells", type=int, required=True, help="cells per axis")
    p.add_argument("--extent", type=float, default=1.0, help="domain edge length (mm)")
    p.add_argument("--slabs", type=int, default=0, help="slab label count (0 = single region)")
    p.add_argument("--axon", help="axonal direction components, comma-separated")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_gen_mesh)

    p = sub.add_parser("gen-graph", help="generate a synthetic connectome")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--topology", default="chain", choices=("chain", "ring", "complete"))
    p.add_argument("--tract-count", dest="tract_count", type=float, default=10.0)
    p.add_argument("--tract-length", dest="tract_length", type=float, default=10.0)
    p.add_argument("--volume", type=float, default=1000.0)
    p.add_argument("--scale-k", dest="scale_k", type=float, default=1.0)
    p.add_argument(
        "--shortcut",
        action="append",
        help="extra edge as 'region_i,region_j' (repeatable)",
    )
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_gen_graph)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--show-defaults" in argv:
        print(serialize_config(SimulationConfig()), end="")
        return 0
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fkneuro: error: config: {exc}", file=sys.stderr)
        return 2
    except FkneuroError as exc:
        print(f"fkneuro: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"fkneuro: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

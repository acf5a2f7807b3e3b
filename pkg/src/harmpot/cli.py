"""Command-line driver.

Subcommands: mesh, topology, harmonic-normal, harmonic-tangent, verify and
export-vtk. Exit status is 0 when every requested check passes, 1 when a
check fails or an input cannot be processed, and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .derham import Cochain, build_complex
from .errors import HarmpotError
from .fileio import load_mesh, save_cochain, save_mesh, save_report, write_vtk
from .harmonic_normal import normal_harmonic_basis, normal_membership
from .harmonic_tangent import tangent_harmonic_basis, verify_membership
from .meshgen import CanonicalDomainSpec, DomainKind, generate_canonical, validate_markers
from .pipeline import VerifyConfig, mass_norm, verify
from .topology import betti_numbers, euler_characteristic, harmonic_dimension

log = logging.getLogger("harmpot")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    domain: str | None = None
    resolution: int | None = None
    cell_size: float = 1.0
    mesh_path: str | None = None
    tol: float = 1e-12
    check_tol: float = 1e-8
    variant: str = "full"
    report: str | None = None
    vtk: str | None = None
    out: str | None = None
    verbose: int = 0

    def __post_init__(self):
        if (self.domain is None) == (self.mesh_path is None):
            raise ValueError("give exactly one of --domain or --mesh")
        if self.domain is not None and self.resolution is None:
            raise ValueError("--domain needs --resolution")
        if not (self.tol > 0 and self.check_tol > 0 and self.cell_size > 0):
            raise ValueError("tolerances and cell size must be positive")

    @classmethod
    def from_args(cls, args):
        return cls(
            subcommand=args.command,
            domain=getattr(args, "domain", None),
            resolution=getattr(args, "resolution", None),
            cell_size=getattr(args, "cell_size", 1.0),
            mesh_path=getattr(args, "mesh", None),
            tol=getattr(args, "tol", 1e-12),
            check_tol=getattr(args, "check_tol", 1e-8),
            variant=getattr(args, "variant", "full"),
            report=getattr(args, "report", None),
            vtk=getattr(args, "vtk", None),
            out=getattr(args, "out", None),
            verbose=args.verbose,
        )

    def load(self):
        if self.mesh_path is not None:
            return load_mesh(self.mesh_path)
        return generate_canonical(CanonicalDomainSpec(DomainKind(self.domain), self.resolution, self.cell_size))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def build_parser():
    p = _Parser(prog="harmpot", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def source(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--domain", choices=[k.value for k in DomainKind])
        g.add_argument("--mesh", help="mesh file written by the mesh subcommand")
        sp.add_argument("--resolution", type=int)
        sp.add_argument("--cell-size", type=float, default=1.0)

    def tols(sp):
        sp.add_argument("--tol", type=float, default=1e-12, help="solver tolerance")
        sp.add_argument("--check-tol", type=float, default=1e-8, help="acceptance tolerance")

    m = sub.add_parser("mesh", help="generate a canonical mesh")
    m.add_argument("--domain", choices=[k.value for k in DomainKind], required=True)
    m.add_argument("--resolution", type=int, required=True)
    m.add_argument("--cell-size", type=float, default=1.0)
    m.add_argument("--out", required=True)

    t = sub.add_parser("topology", help="Betti numbers, harmonic dimensions and markers")
    source(t)
    t.add_argument("--report")

    n = sub.add_parser("harmonic-normal", help="normal harmonic basis")
    source(n)
    tols(n)
    n.add_argument("--report")
    n.add_argument("--vtk", help="directory for VTK output")
    n.add_argument("--out", help="directory for cochain text files")

    h = sub.add_parser("harmonic-tangent", help="tangent harmonic basis")
    source(h)
    tols(h)
    h.add_argument("--variant", choices=["full", "simplified", "both"], default="full")
    h.add_argument("--report")
    h.add_argument("--vtk", help="directory for VTK output")
    h.add_argument("--out", help="directory for cochain text files")

    v = sub.add_parser("verify", help="run every check and print a report")
    source(v)
    tols(v)
    v.add_argument("--variant", choices=["full", "simplified", "both"], default="both")
    v.add_argument("--report")
    v.add_argument("--vtk", help="directory for VTK output")

    e = sub.add_parser("export-vtk", help="write mesh and harmonic fields as VTK")
    source(e)
    tols(e)
    e.add_argument("--out", required=True, help="output .vtk file")
    return p


def _emit(data, cfg, title):
    from .fileio import format_report

    text = format_report(data, title)
    sys.stdout.write(text)
    if cfg.report:
        save_report(data, cfg.report, title)


def _cmd_mesh(cfg):
    mesh = cfg.load()
    save_mesh(mesh, cfg.out)
    print(f"wrote {cfg.out}: {mesh.n_vertices} vertices, {mesh.n_tets} tets, "
          f"{len(mesh.boundary_components)} boundary components, {len(mesh.tunnel_loops)} tunnel loops")
    return 0


def _cmd_topology(cfg):
    mesh = cfg.load()
    cx = build_complex(mesh)
    betti = tuple(betti_numbers(cx))
    dims = [harmonic_dimension(cx, k) for k in (1, 2)]
    markers = validate_markers(mesh)
    chi = euler_characteristic(cx)
    data = {
        "name": mesh.name,
        "counts": list(cx.counts),
        "betti": list(betti),
        "harmonic_dims": dims,
        "euler_characteristic": chi,
        "euler_identity": chi == betti[0] - betti[1] + betti[2] - betti[3],
        "crossing": markers.crossing.tolist(),
        "markers": markers.summary(),
    }
    ok = data["euler_identity"] and markers.passed and dims == [betti[1], betti[2]]
    data["passed"] = ok
    _emit(data, cfg, "topology")
    return 0 if ok else 1


def _normal(cfg, mesh, cx):
    nb = normal_harmonic_basis(cx, mesh.boundary_components, cfg.tol)
    return nb


def _cmd_normal(cfg):
    mesh = cfg.load()
    cx = build_complex(mesh)
    nb = _normal(cfg, mesh, cx)
    mem = [normal_membership(cx, nb.fields[:, i]) for i in range(nb.size)]
    dev = float(np.abs(nb.G - np.eye(nb.size)).max(initial=0.0))
    ok = dev <= cfg.check_tol and all(
        m["boundary_edge_max"] == 0 and m["curl_max"] == 0 and m["weak_div_rel"] <= cfg.check_tol for m in mem
    )
    data = {"name": mesh.name, "G": nb.G.tolist(), "G_minus_I": dev, "cg_residuals": nb.residuals,
            "cg_iterations": nb.iterations, "membership": mem, "passed": ok}
    _emit(data, cfg, "normal harmonic basis")
    fields = {}
    for i in range(nb.size):
        fields[f"phi_{i + 1}"] = Cochain(0, nb.potentials[:, i])
        fields[f"v_{i + 1}"] = Cochain(1, nb.fields[:, i])
    _write_outputs(cfg, cx, fields, "normal")
    return 0 if ok else 1


def _cmd_tangent(cfg):
    mesh = cfg.load()
    cx = build_complex(mesh)
    if not validate_markers(mesh).passed:
        print("markers failed validation; refusing to compute tangent fields", file=sys.stderr)
        return 1
    nb = _normal(cfg, mesh, cx)
    variants = ["full", "simplified"] if cfg.variant == "both" else [cfg.variant]
    data = {"name": mesh.name}
    ok = True
    bases = {}
    for variant in variants:
        tb = tangent_harmonic_basis(cx, mesh, nb, cfg.tol, variant)
        bases[variant] = tb
        dev = float(np.abs(tb.F - np.eye(tb.size)).max(initial=0.0))
        mem = [verify_membership(cx, tb.fields[:, i], mesh) for i in range(tb.size)]
        sig = max((c.sigma_norm for c in tb.corrections), default=0.0)
        pn = max((c.p_norm for c in tb.corrections), default=0.0)
        data[f"F_{variant}"] = tb.F.tolist()
        data[f"F_minus_I_{variant}"] = dev
        data[f"sigma_max_{variant}"] = sig
        data[f"p_max_{variant}"] = pn
        data[f"saddle_residuals_{variant}"] = [c.residual for c in tb.corrections]
        data[f"membership_{variant}"] = mem
        ok &= dev <= cfg.check_tol and sig <= cfg.check_tol and pn <= cfg.check_tol
        ok &= all(m["div_max"] == 0 and m["boundary_face_max"] == 0 and m["curl_orthogonality_rel"] <= cfg.check_tol for m in mem)
    if len(bases) == 2:
        M1i = cx.mass(1)[cx.interior[1]][:, cx.interior[1]]
        gap = max(
            (mass_norm(M1i, a.A0 - b.A0) / max(1.0, mass_norm(M1i, a.A0))
             for a, b in zip(bases["full"].corrections, bases["simplified"].corrections)),
            default=0.0,
        )
        data["equivalence_gap"] = gap
        ok &= gap <= cfg.check_tol
    data["passed"] = bool(ok)
    _emit(data, cfg, "tangent harmonic basis")
    fields = {}
    for variant, tb in bases.items():
        for i in range(tb.size):
            fields[f"A_{variant}_{i + 1}"] = Cochain(1, tb.potentials[:, i])
            fields[f"w_{variant}_{i + 1}"] = Cochain(2, tb.fields[:, i])
    _write_outputs(cfg, cx, fields, "tangent")
    return 0 if ok else 1


def _write_outputs(cfg, cx, fields, stem):
    if cfg.out and cfg.subcommand != "export-vtk":
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, c in fields.items():
            save_cochain(c.values, out / f"{name}.txt")
    if cfg.vtk:
        out = Path(cfg.vtk)
        out.mkdir(parents=True, exist_ok=True)
        write_vtk(cx, fields, out / f"{stem}.vtk")


def _artifact_fields(art):
    fields = {}
    nb = art.get("normal")
    if nb is not None:
        for i in range(nb.size):
            fields[f"phi_{i + 1}"] = Cochain(0, nb.potentials[:, i])
            fields[f"v_{i + 1}"] = Cochain(1, nb.fields[:, i])
    for variant, tb in art.get("tangent", {}).items():
        for i in range(tb.size):
            fields[f"w_{variant}_{i + 1}"] = Cochain(2, tb.fields[:, i])
    return fields


def _cmd_verify(cfg):
    mesh = cfg.load()
    report, art = verify(mesh, VerifyConfig(cfg.tol, cfg.check_tol, variant=cfg.variant))
    _emit(report.as_dict(), cfg, "verification")
    if cfg.vtk:
        _write_outputs(cfg, art["complex"], _artifact_fields(art), "verify")
    return 0 if report.passed else 1


def _cmd_export(cfg):
    mesh = cfg.load()
    report, art = verify(mesh, VerifyConfig(cfg.tol, cfg.check_tol, variant="full", span_check=False))
    write_vtk(art["complex"], _artifact_fields(art), cfg.out, title=mesh.name or "harmpot")
    print(f"wrote {cfg.out}")
    return 0 if report.passed else 1


COMMANDS = {
    "mesh": _cmd_mesh,
    "topology": _cmd_topology,
    "harmonic-normal": _cmd_normal,
    "harmonic-tangent": _cmd_tangent,
    "verify": _cmd_verify,
    "export-vtk": _cmd_export,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = RunConfig.from_args(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"harmpot: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:          # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except (HarmpotError, OSError) as exc:
        print(f"harmpot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

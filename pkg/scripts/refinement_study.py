"""Duality errors, CG iterations and wall time under mesh refinement.

Builds both harmonic bases on one canonical domain for a range of
resolutions and prints how the quality and cost scale. The dense harmonic
dimension check is skipped so larger meshes stay affordable.

    python3 scripts/refinement_study.py --domain fig1 --resolutions 8 10 12 14
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from harmpot import CanonicalDomainSpec, build_complex, generate_canonical
from harmpot.harmonic_normal import normal_harmonic_basis
from harmpot.harmonic_tangent import tangent_harmonic_basis, verify_membership


@dataclass
class StudyConfig:
    domain: str = "fig1"
    resolutions: tuple = (8, 10, 12, 14)
    tol: float = 1e-12
    variant: str = "full"


def study(config: StudyConfig):
    header = (f"{'n':>4}{'tets':>8}{'edges':>8}{'cg its':>10}{'|G-I|':>10}"
              f"{'|F-I|':>10}{'div max':>10}{'normal':>9}{'tangent':>9}")
    print(f"domain {config.domain}, variant {config.variant}")
    print(header)
    print("-" * len(header))
    for n in config.resolutions:
        mesh = generate_canonical(CanonicalDomainSpec(config.domain, n))
        cx = build_complex(mesh)
        t0 = time.perf_counter()
        normal = normal_harmonic_basis(cx, mesh.boundary_components, tol=config.tol)
        t_normal = time.perf_counter() - t0
        t0 = time.perf_counter()
        tangent = tangent_harmonic_basis(cx, mesh, normal, tol=config.tol, variant=config.variant)
        t_tangent = time.perf_counter() - t0
        g_err = float(np.abs(normal.G - np.eye(normal.size)).max()) if normal.size else 0.0
        f_err = float(np.abs(tangent.F - np.eye(tangent.size)).max()) if tangent.size else 0.0
        div = max((verify_membership(cx, w, mesh)["div_max"] for w in tangent.fields.T), default=0.0)
        its = "/".join(str(i) for i in normal.iterations) or "-"
        print(f"{n:>4}{cx.counts[3]:>8}{cx.counts[1]:>8}{its:>10}{g_err:>10.1e}"
              f"{f_err:>10.1e}{div:>10.1e}{t_normal:>8.2f}s{t_tangent:>8.2f}s")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--domain", default="fig1")
    parser.add_argument("--resolutions", type=int, nargs="+", default=[8, 10, 12, 14])
    parser.add_argument("--tol", type=float, default=1e-12)
    parser.add_argument("--variant", default="full", choices=["full", "simplified"])
    args = parser.parse_args()
    study(StudyConfig(args.domain, tuple(args.resolutions), args.tol, args.variant))


if __name__ == "__main__":
    main()

"""Run the full verification pipeline on every canonical domain.

Prints one summary row per domain and optionally writes all reports as JSON.

    python3 scripts/run_all_domains.py --json results/all_domains.json
"""
from __future__ import annotations

import argparse
import json
from dataclasses import dataclass, field
from pathlib import Path

from harmpot import CanonicalDomainSpec, DomainKind, VerifyConfig, generate_canonical, verify

DEFAULT_RESOLUTIONS = {
    DomainKind.BOX: 6,
    DomainKind.BOX_WITH_TUNNEL: 6,
    DomainKind.BOX_WITH_CAVITY: 6,
    DomainKind.HOLLOW_TORUS: 8,
    DomainKind.FIG1: 10,
}


@dataclass
class RunAllConfig:
    resolutions: dict = field(default_factory=lambda: dict(DEFAULT_RESOLUTIONS))
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    json_path: Path | None = None


def max_offdiag_identity(matrix):
    worst = 0.0
    for i, row in enumerate(matrix):
        for j, value in enumerate(row):
            worst = max(worst, abs(value - (1.0 if i == j else 0.0)))
    return worst


def run(config: RunAllConfig):
    rows, reports = [], {}
    for kind, n in config.resolutions.items():
        mesh = generate_canonical(CanonicalDomainSpec(kind, n))
        report, _ = verify(mesh, config.verify)
        reports[mesh.name] = report.as_dict()
        F_err = max((max_offdiag_identity(F) for F in report.F.values()), default=0.0)
        rows.append((
            mesh.name, len(mesh.tets), report.betti, report.harmonic_dims,
            max_offdiag_identity(report.G) if report.G else 0.0, F_err,
            sum(report.timings.values()), report.passed,
        ))
    header = f"{'domain':<28}{'tets':>7}  {'betti':<14}{'dims':<8}{'|G-I|':>9}{'|F-I|':>9}{'time':>8}  ok"
    print(header)
    print("-" * len(header))
    for name, tets, betti, dims, g, f, t, ok in rows:
        print(f"{name:<28}{tets:>7}  {str(tuple(betti)):<14}{str(tuple(dims)):<8}"
              f"{g:>9.1e}{f:>9.1e}{t:>7.2f}s  {'yes' if ok else 'NO'}")
    if config.json_path is not None:
        config.json_path.parent.mkdir(parents=True, exist_ok=True)
        config.json_path.write_text(json.dumps(reports, indent=2))
    return all(r[-1] for r in rows)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--json", type=Path, default=None, help="write all reports here")
    parser.add_argument("--tol", type=float, default=1e-12, help="solver tolerance")
    parser.add_argument("--variant", default="both", choices=["full", "simplified", "both"])
    args = parser.parse_args()
    config = RunAllConfig(
        verify=VerifyConfig(solver_tol=args.tol, variant=args.variant), json_path=args.json
    )
    raise SystemExit(0 if run(config) else 1)


if __name__ == "__main__":
    main()

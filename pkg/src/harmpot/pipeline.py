"""End-to-end computation and verification of both harmonic bases."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import simplices as sx
from .derham import build_complex
from .harmonic_normal import normal_harmonic_basis, normal_membership
from .harmonic_tangent import (
    build_boundary_lift,
    lift_circulations,
    tangent_harmonic_basis,
    verify_membership,
)
from .meshgen import EXPECTED_BETTI, DomainKind, validate_markers
from .topology import betti_numbers, euler_characteristic, harmonic_dimension


@dataclass(frozen=True)
class VerifyConfig:
    solver_tol: float = 1e-12
    check_tol: float = 1e-8
    svd_threshold: float = 1e-10
    variant: str = "both"          # full | simplified | both
    span_check: bool = True

    def __post_init__(self):
        for name in ("solver_tol", "check_tol", "svd_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.variant not in ("full", "simplified", "both"):
            raise ValueError("variant must be full, simplified or both")


@dataclass
class VerificationReport:
    name: str
    betti: tuple
    harmonic_dims: tuple
    crossing: list
    G: list
    F: dict
    residuals: dict
    checks: dict
    timings: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def as_dict(self, timings=True):
        out = {
            "name": self.name,
            "passed": self.passed,
            "betti": list(self.betti),
            "harmonic_dims": list(self.harmonic_dims),
            "crossing": self.crossing,
            "G": self.G,
            "F": self.F,
            "residuals": self.residuals,
            "checks": self.checks,
        }
        if timings:
            out["timings"] = self.timings
        return out


def mass_norm(M, x):
    return float(np.sqrt(abs(x @ (M @ x))))


def span_residual(basis, fields, M):
    """Largest relative M-norm distance of the ``basis`` columns from span(fields)."""
    basis = np.asarray(basis, dtype=float)
    fields = np.asarray(fields, dtype=float)
    if basis.shape[1] == 0:
        return 0.0
    if fields.shape[1] == 0:
        return 1.0
    gram = fields.T @ (M @ fields)
    coef = np.linalg.solve(gram, fields.T @ (M @ basis))
    worst = 0.0
    for k in range(basis.shape[1]):
        r = basis[:, k] - fields @ coef[:, k]
        worst = max(worst, mass_norm(M, r) / max(mass_norm(M, basis[:, k]), 1e-300))
    return worst


def gram_min_singular(fields, M):
    if fields.shape[1] == 0:
        return 1.0
    gram = fields.T @ (M @ fields)
    s = np.linalg.svd(gram, compute_uv=False)
    return float(s.min() / s.max())


def verify(mesh, config: VerifyConfig = VerifyConfig()):
    """Run the whole pipeline on a marked mesh.

    Returns ``(report, artifacts)``; ``artifacts`` holds the complex and the
    computed bases for export.
    """
    tol = config.check_tol
    timings = {}
    checks = {}
    residuals = {}
    t0 = time.perf_counter()
    markers = validate_markers(mesh)
    checks["markers_valid"] = markers.passed
    cx = build_complex(mesh)
    timings["complex"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    betti = tuple(betti_numbers(cx))
    checks["euler_identity"] = euler_characteristic(cx) == betti[0] - betti[1] + betti[2] - betti[3]
    kind = mesh.metadata.get("kind")
    if kind is not None:
        checks["betti_expected"] = betti == EXPECTED_BETTI[DomainKind(kind)]
    checks["markers_match_betti"] = (
        len(mesh.tunnel_loops) == betti[1] and len(mesh.boundary_components) - 1 == betti[2]
    )
    dims, null_bases = [], {}
    for k in (1, 2):
        d, basis = harmonic_dimension(cx, k, config.svd_threshold, return_basis=True)
        dims.append(d)
        null_bases[k] = basis
        checks[f"harmonic_dim_{k}"] = d == betti[k]
    timings["topology"] = time.perf_counter() - t0

    artifacts = {"complex": cx, "markers": markers}
    if not markers.passed:
        # refuse to build fields from markers that do not satisfy the assumptions
        report = VerificationReport(mesh.name, betti, tuple(dims), markers.crossing.tolist(), [], {}, residuals, checks, timings)
        return report, artifacts

    t0 = time.perf_counter()
    nb = normal_harmonic_basis(cx, mesh.boundary_components, config.solver_tol)
    artifacts["normal"] = nb
    M1, M2 = cx.mass(1), cx.mass(2)
    m2 = nb.size
    residuals["G_minus_I"] = float(np.abs(nb.G - np.eye(m2)).max(initial=0.0))
    checks["normal_duality"] = residuals["G_minus_I"] <= tol
    mem = [normal_membership(cx, nb.fields[:, i]) for i in range(m2)]
    checks["normal_boundary_zero"] = all(m["boundary_edge_max"] == 0.0 for m in mem)
    checks["normal_curl_zero"] = all(m["curl_max"] == 0.0 for m in mem)
    residuals["normal_weak_div"] = max((m["weak_div_rel"] for m in mem), default=0.0)
    checks["normal_weak_div"] = residuals["normal_weak_div"] <= tol
    residuals["normal_gram_min_sv"] = gram_min_singular(nb.fields, M1)
    checks["normal_independent"] = residuals["normal_gram_min_sv"] > 1e-10
    checks["normal_count"] = m2 == dims[1]
    timings["normal"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    m1 = len(mesh.tunnel_loops)
    fans = sx.vertex_fans(mesh.boundary_triangles) if m1 else None
    lifts = [build_boundary_lift(cx, mesh, i, fans) for i in range(m1)]
    circ = lift_circulations(cx, mesh, lifts)
    checks["lift_circulation_identity"] = bool(np.array_equal(circ, np.eye(m1)))
    checks["lift_surface_curl_zero"] = all(
        not np.any(cx.D[1][cx.boundary[2]] @ l.values) for l in lifts
    )
    checks["lift_boundary_supported"] = all(not np.any(l.values[cx.interior[1]]) for l in lifts)
    variants = ["full", "simplified"] if config.variant == "both" else [config.variant]
    bases = {}
    for variant in variants:
        tb = tangent_harmonic_basis(cx, mesh, nb, config.solver_tol, variant, lifts=lifts)
        bases[variant] = tb
        dev = float(np.abs(tb.F - np.eye(m1)).max(initial=0.0))
        residuals[f"F_minus_I_{variant}"] = dev
        checks[f"tangent_flux_duality_{variant}"] = dev <= tol
        residuals[f"sigma_max_{variant}"] = max((c.sigma_norm for c in tb.corrections), default=0.0)
        residuals[f"p_max_{variant}"] = max((c.p_norm for c in tb.corrections), default=0.0)
        residuals[f"saddle_residual_{variant}"] = max((c.residual for c in tb.corrections), default=0.0)
        checks[f"sigma_vanishes_{variant}"] = residuals[f"sigma_max_{variant}"] <= tol
        checks[f"p_vanishes_{variant}"] = residuals[f"p_max_{variant}"] <= tol
        mem = [verify_membership(cx, tb.fields[:, i]) for i in range(m1)]
        checks[f"tangent_div_zero_{variant}"] = all(m["div_max"] == 0.0 for m in mem)
        checks[f"tangent_boundary_zero_{variant}"] = all(m["boundary_face_max"] == 0.0 for m in mem)
        residuals[f"tangent_orthogonality_{variant}"] = max((m["curl_orthogonality_rel"] for m in mem), default=0.0)
        checks[f"tangent_orthogonality_{variant}"] = residuals[f"tangent_orthogonality_{variant}"] <= tol
        residuals[f"tangent_gram_min_sv_{variant}"] = gram_min_singular(tb.fields, M2)
        checks[f"tangent_independent_{variant}"] = residuals[f"tangent_gram_min_sv_{variant}"] > 1e-10
    artifacts["tangent"] = bases
    if len(bases) == 2:
        M1i = M1[cx.interior[1]][:, cx.interior[1]]
        gaps = [
            mass_norm(M1i, a.A0 - b.A0) / max(1.0, mass_norm(M1i, a.A0))
            for a, b in zip(bases["full"].corrections, bases["simplified"].corrections)
        ]
        residuals["equivalence_gap"] = max(gaps, default=0.0)
        checks["variant_equivalence"] = residuals["equivalence_gap"] <= tol
    timings["tangent"] = time.perf_counter() - t0

    if config.span_check:
        t0 = time.perf_counter()
        some = next(iter(bases.values()))
        M2i = M2[cx.interior[2]][:, cx.interior[2]]
        residuals["span_tangent"] = span_residual(null_bases[1], some.fields[cx.interior[2]], M2i)
        M1i = M1[cx.interior[1]][:, cx.interior[1]]
        residuals["span_normal"] = span_residual(null_bases[2], nb.fields[cx.interior[1]], M1i)
        checks["span_tangent"] = residuals["span_tangent"] <= tol
        checks["span_normal"] = residuals["span_normal"] <= tol
        timings["span"] = time.perf_counter() - t0

    F = {v: b.F.tolist() for v, b in bases.items()}
    report = VerificationReport(
        mesh.name, betti, tuple(dims), markers.crossing.tolist(), nb.G.tolist(), F, residuals, checks, timings
    )
    return report, artifacts

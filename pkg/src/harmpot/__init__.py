"""Bases of discrete harmonic fields on 3D domains with cavities and tunnels.

Lowest-order Whitney elements on voxel-generated tetrahedral meshes. Normal
harmonic fields are gradients of cavity-fitted potentials, tangent harmonic
fields are curls of tunnel-fitted vector potentials.
"""
from .derham import Cochain, DeRhamComplex, apply_d, assemble_mass, build_complex, interpolate
from .harmonic_normal import normal_harmonic_basis
from .harmonic_tangent import tangent_harmonic_basis
from .meshgen import CanonicalDomainSpec, DomainKind, MarkedMesh, generate_canonical, validate_markers
from .pipeline import VerificationReport, VerifyConfig, verify
from .topology import betti_numbers, harmonic_dimension

__version__ = "0.1.0"

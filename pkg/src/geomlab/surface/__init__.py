"""Discrete and analytic closed hypersurfaces."""

from .analytic import (
    AnalyticHypersurface,
    gen_analytic_ellipsoid,
    gen_analytic_perturbed_sphere,
    gen_analytic_radial_graph,
    gen_analytic_sphere,
    sphere_quadrature,
    tangent_frames,
)
from .generate import (
    FamilySpec,
    HarmonicField,
    gen_ellipsoid,
    gen_icosphere,
    gen_perturbed_sphere,
    load_family_spec,
    parse_amplitudes,
    perturbed_sphere,
)
from .io import atomic_write_text, format_off, load_off, save_off
from .mesh import (
    Mesh,
    area,
    build_mesh,
    center_of_mass,
    disjoint_union,
    enclosed_volume,
    repair_orientation,
)

__all__ = [
    "AnalyticHypersurface",
    "FamilySpec",
    "HarmonicField",
    "Mesh",
    "area",
    "atomic_write_text",
    "build_mesh",
    "center_of_mass",
    "disjoint_union",
    "enclosed_volume",
    "format_off",
    "gen_analytic_ellipsoid",
    "gen_analytic_perturbed_sphere",
    "gen_analytic_radial_graph",
    "gen_analytic_sphere",
    "gen_ellipsoid",
    "gen_icosphere",
    "gen_perturbed_sphere",
    "load_family_spec",
    "load_off",
    "parse_amplitudes",
    "perturbed_sphere",
    "repair_orientation",
    "save_off",
    "sphere_quadrature",
    "tangent_frames",
]

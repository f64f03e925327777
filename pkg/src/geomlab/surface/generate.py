"""Mesh generators: icospheres, ellipsoids and harmonic radial perturbations."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import sph_harm_y

from ..errors import InvalidArgument, ParseError
from .mesh import Mesh

MAX_LEVEL = 8
MIN_RADIUS = 0.5
# reference grid on which harmonic fields are normalized to unit sup norm
_NORM_LEVEL = 6


def _icosahedron():
    p = (1.0 + 5.0 ** 0.5) / 2.0
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _subdivide(v, f):
    nv = len(v)
    he = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    key = np.minimum(he[:, 0], he[:, 1]) * nv + np.maximum(he[:, 0], he[:, 1])
    uniq, inv = np.unique(key, return_inverse=True)
    a, b = uniq // nv, uniq % nv
    mid = v[a] + v[b]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    nf = len(f)
    m01, m12, m20 = (inv[k * nf:(k + 1) * nf] + nv for k in range(3))
    v0, v1, v2 = f[:, 0], f[:, 1], f[:, 2]
    nfaces = np.concatenate(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([v1, m12, m01]),
            np.column_stack([v2, m20, m12]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    return np.vstack([v, mid]), nfaces


@lru_cache(maxsize=None)
def _unit_icosphere(level):
    v, f = _icosahedron()
    for _ in range(level):
        v, f = _subdivide(v, f)
    v.setflags(write=False)
    f.setflags(write=False)
    return v, f


def gen_icosphere(level: int, radius: float = 1.0) -> Mesh:
    """Geodesic icosphere with ``10 * 4**level + 2`` vertices.

    Raises
    ------
    InvalidArgument
        If ``level`` is outside ``[0, 8]`` or ``radius <= 0``.
    """
    if not isinstance(level, (int, np.integer)) or not 0 <= level <= MAX_LEVEL:
        raise InvalidArgument(f"level must be an integer in [0, {MAX_LEVEL}], got {level!r}")
    if not radius > 0:
        raise InvalidArgument(f"radius must be positive, got {radius!r}")
    v, f = _unit_icosphere(int(level))
    return Mesh(radius * v, f, level=int(level), name=f"icosphere(L{level},r={radius:g})")


def gen_ellipsoid(axes: Sequence[float], level: int) -> Mesh:
    """Icosphere scaled componentwise by the semi-axes ``(a, b, c)``."""
    axes = np.asarray(axes, dtype=float)
    if axes.shape != (3,) or not np.all(axes > 0):
        raise InvalidArgument(f"ellipsoid needs three positive semi-axes, got {axes.tolist()}")
    base = gen_icosphere(level)
    name = "ellipsoid(" + ",".join(f"{a:g}" for a in axes) + f";L{level})"
    return Mesh(base.vertices * axes, base.faces, level=int(level), name=name)


class HarmonicField:
    """Fixed random real combination of spherical harmonics of degrees 2..lmax.

    Degrees 0 and 1 are excluded (dilations and translations). Coefficients
    are drawn from ``default_rng(seed)`` with standard deviation ``1/l`` and
    the field is scaled to unit sup norm on a level-6 icosphere grid.
    """

    def __init__(self, lmax: int = 4, seed: int = 0):
        if lmax < 2:
            raise InvalidArgument("harmonic perturbations need lmax >= 2")
        self.lmax = int(lmax)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self.terms = []
        for l in range(2, self.lmax + 1):
            for m in range(-l, l + 1):
                self.terms.append((l, m, rng.standard_normal() / l))
        ref, _ = _unit_icosphere(_NORM_LEVEL)
        self.scale = 1.0
        self.scale = 1.0 / float(np.max(np.abs(self(ref))))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        u = u / np.linalg.norm(u, axis=-1, keepdims=True)
        theta = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
        phi = np.arctan2(u[..., 1], u[..., 0])
        out = np.zeros(u.shape[:-1])
        for l, m, c in self.terms:
            y = sph_harm_y(l, abs(m), theta, phi)
            if m > 0:
                y = np.sqrt(2.0) * y.real
            elif m < 0:
                y = np.sqrt(2.0) * y.imag
            else:
                y = y.real
            out += c * y
        return self.scale * out

    @property
    def sup_norm(self):
        return 1.0


def perturbed_sphere(t: float, lmax: int = 4, seed: int = 0, level: int = 4) -> Mesh:
    """Radial graph ``rho(u) = 1 + t * phi(u)`` over the unit icosphere."""
    phi = HarmonicField(lmax, seed)
    if not t >= 0:
        raise InvalidArgument(f"amplitude must be nonnegative, got {t!r}")
    if t * phi.sup_norm >= 1.0 - MIN_RADIUS:
        raise InvalidArgument(
            f"amplitude {t:g} too large: min radial value would drop to <= {MIN_RADIUS}"
        )
    base = gen_icosphere(level)
    if t == 0:
        return base
    rho = 1.0 + t * phi(base.vertices)
    return Mesh(
        base.vertices * rho[:, None],
        base.faces,
        level=int(level),
        name=f"perturbed(t={t:g},lmax={lmax},seed={seed};L{level})",
    )


FAMILY_KINDS = ("ellipsoid-sweep", "harmonic-perturbation")
_FAMILY_ALIASES = {
    "ellipsoid": "ellipsoid-sweep",
    "ellipsoid-sweep": "ellipsoid-sweep",
    "harmonic": "harmonic-perturbation",
    "harmonic-perturbation": "harmonic-perturbation",
    "perturbed-sphere": "harmonic-perturbation",
}


@dataclass(frozen=True)
class FamilySpec:
    """A one-parameter family of near-spherical test surfaces.

    ``ellipsoid-sweep`` members are ellipsoids ``(1, 1, 1 + t)``;
    ``harmonic-perturbation`` members are :func:`perturbed_sphere` at ``t``.
    """

    family: str
    amplitudes: tuple
    lmax: int = 4
    seed: int = 0

    def __post_init__(self):
        kind = _FAMILY_ALIASES.get(self.family)
        if kind is None:
            raise InvalidArgument(f"unknown family {self.family!r}; expected one of {FAMILY_KINDS}")
        object.__setattr__(self, "family", kind)
        amps = tuple(float(a) for a in self.amplitudes)
        if not amps:
            raise InvalidArgument("family needs at least one amplitude")
        if any(a <= 0 for a in amps):
            raise InvalidArgument("amplitudes must be strictly positive")
        if any(b <= a for a, b in zip(amps, amps[1:])):
            raise InvalidArgument("amplitudes must be strictly increasing")
        object.__setattr__(self, "amplitudes", amps)
        if kind == "harmonic-perturbation":
            if self.lmax < 2:
                raise InvalidArgument("lmax must be >= 2")
            if amps[-1] >= 1.0 - MIN_RADIUS:
                raise InvalidArgument("largest amplitude leaves the embedded regime")

    def member(self, index: int, level: int = 4) -> Mesh:
        t = self.amplitudes[index]
        if self.family == "ellipsoid-sweep":
            return gen_ellipsoid((1.0, 1.0, 1.0 + t), level)
        return perturbed_sphere(t, self.lmax, self.seed, level)


def gen_perturbed_sphere(spec: FamilySpec, index: int, level: int = 4) -> Mesh:
    """Member ``index`` of a harmonic-perturbation family."""
    if spec.family != "harmonic-perturbation":
        raise InvalidArgument("gen_perturbed_sphere needs a harmonic-perturbation family")
    return spec.member(index, level)


def parse_amplitudes(text: str) -> tuple:
    """``"0.02:0.2:8"`` (linspace start:stop:count) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidArgument(f"amplitude range must be start:stop:count, got {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise InvalidArgument(f"bad amplitude range {text!r}") from exc
        if count < 1:
            raise InvalidArgument("amplitude count must be positive")
        return tuple(float(x) for x in np.linspace(start, stop, count))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise InvalidArgument(f"bad amplitude list {text!r}") from exc


def load_family_spec(path) -> FamilySpec:
    """Read a ``key=value`` config with keys family, lmax, seed, amplitudes."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw!r}", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in ("family", "lmax", "seed", "amplitudes"):
            raise ParseError(f"unknown key {key!r}", line=lineno)
        values[key] = (val, lineno)
    for key in ("family", "amplitudes"):
        if key not in values:
            raise ParseError(f"missing required key {key!r}")
    kwargs = {"family": values["family"][0], "amplitudes": parse_amplitudes(values["amplitudes"][0])}
    for key in ("lmax", "seed"):
        if key in values:
            val, lineno = values[key]
            try:
                kwargs[key] = int(val)
            except ValueError:
                raise ParseError(f"{key} must be an integer, got {val!r}", line=lineno) from None
    return FamilySpec(**kwargs)

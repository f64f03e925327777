"""Per-mesh cache of curvature, Galerkin pairs and spectra shared by the report modules."""

from __future__ import annotations

import threading

import numpy as np

from .curvature import CurvatureField, NewtonTensorField, resolve_tensor, shape_operator, tensor_label
from .spectral import GalerkinPair, Spectrum, assemble, lambda1, solve_lowest
from .surface.mesh import Mesh


class SurfaceContext:
    """Lazily computed geometry of one mesh.

    Thread-safe: each cached quantity is computed once under a lock.
    """

    def __init__(self, mesh: Mesh, curvature: CurvatureField = None, k: int = 6):
        self.mesh = mesh
        self.k = k
        self._curvature = curvature
        self._pairs = {}
        self._spectra = {}
        self._lock = threading.RLock()

    @classmethod
    def of(cls, obj):
        return obj if isinstance(obj, cls) else cls(obj)

    @property
    def level(self):
        return self.mesh.level

    @property
    def curvature(self) -> CurvatureField:
        with self._lock:
            if self._curvature is None:
                self._curvature = shape_operator(self.mesh)
            return self._curvature

    def tensor(self, spec) -> NewtonTensorField:
        return resolve_tensor(self.curvature, spec)

    def pair(self, spec=None) -> GalerkinPair:
        T = self.tensor(spec)
        key = tensor_label(T)
        with self._lock:
            if key not in self._pairs:
                self._pairs[key] = assemble(self.mesh, T, curvature=self.curvature)
            return self._pairs[key]

    def spectrum(self, spec=None) -> Spectrum:
        P = self.pair(spec)
        with self._lock:
            if P.label not in self._spectra:
                self._spectra[P.label] = solve_lowest(P, self.k)
            return self._spectra[P.label]

    def lambda1(self, spec=None) -> float:
        return lambda1(self.pair(spec), self.spectrum(spec))

    def first_eigenfunction(self, spec=None):
        sp = self.spectrum(spec)
        self.lambda1(spec)
        return sp.eigenvectors[:, sp.kernel_dimension]

    @property
    def area(self):
        return float(self.curvature.weights.sum())

    def metadata(self):
        return {
            "name": self.mesh.name,
            "vertices": int(self.mesh.nv),
            "faces": int(self.mesh.nf),
            "level": self.level,
            "area": float(self.mesh.area),
            "volume": float(self.mesh.enclosed_volume),
            "center_of_mass": [float(x) for x in np.asarray(self.mesh.center_of_mass)],
        }

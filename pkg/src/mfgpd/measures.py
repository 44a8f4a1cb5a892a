"""Array containers for flows, occupation measures, policies and certificates.

Shapes, with K slabs, N state nodes and J actions:

* ``MeanFieldFlow.m``        -- (K+1, N), one probability vector per time node
* ``OccupationMeasure.xi``   -- (K, N, J), time-integrated state-action mass
* ``OccupationMeasure.nu``   -- (N,), terminal state distribution
* ``Policy.kernel``          -- (K, N, J), action probabilities per slab/node
* ``DualCertificate.psi``    -- (K+1, N), subsolution values on time nodes
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentMeasureError

FLOW_TOL = 1e-9


@dataclass(eq=False)
class MeanFieldFlow:
    m: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        if self.m.ndim != 2:
            raise ValueError("flow must be a (n_time+1, n_nodes) matrix")

    @property
    def n_time(self):
        return self.m.shape[0] - 1

    def validate(self, tol: float = FLOW_TOL):
        if not np.all(np.isfinite(self.m)):
            raise InconsistentMeasureError("flow has non-finite entries")
        if self.m.min() < -tol:
            raise InconsistentMeasureError(f"flow has negative mass {self.m.min():.3e}")
        err = np.max(np.abs(self.m.sum(axis=1) - 1.0))
        if err > tol:
            raise InconsistentMeasureError(f"flow rows do not sum to 1 (max error {err:.3e})")
        return self

    def normalized(self):
        m = np.clip(self.m, 0.0, None)
        return MeanFieldFlow(m / m.sum(axis=1, keepdims=True))

    @classmethod
    def constant(cls, weights, n_time):
        return cls(np.tile(np.asarray(weights, dtype=float), (n_time + 1, 1)))


def as_flow(flow) -> MeanFieldFlow:
    return flow if isinstance(flow, MeanFieldFlow) else MeanFieldFlow(flow)


@dataclass(eq=False)
class OccupationMeasure:
    xi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)

    def slab_mass(self):
        return self.xi.sum(axis=(1, 2))

    def check(self, dt, tol=1e-10):
        """Raise unless every slab carries mass dt and nu is a probability vector."""
        err = np.max(np.abs(self.slab_mass() - dt))
        if err > tol:
            raise InconsistentMeasureError(f"slab mass differs from dt by {err:.3e}")
        err = abs(self.nu.sum() - 1.0)
        if err > tol:
            raise InconsistentMeasureError(f"terminal measure has mass error {err:.3e}")
        return self


@dataclass(eq=False)
class Policy:
    kernel: np.ndarray
    unconstrained: np.ndarray

    @classmethod
    def deterministic(cls, actions, n_actions):
        """Policy from an integer action index per (slab, node)."""
        actions = np.asarray(actions, dtype=np.int64)
        kernel = np.zeros(actions.shape + (n_actions,))
        np.put_along_axis(kernel, actions[..., None], 1.0, axis=-1)
        return cls(kernel, np.zeros(actions.shape, dtype=bool))


@dataclass(eq=False)
class DualCertificate:
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)

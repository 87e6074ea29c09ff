from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import trapezoid


class Branch(str, Enum):
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"

    @property
    def sign(self) -> int:
        """+1 when Z-(z) = Z+(-z-b), -1 when Z-(z) = -Z+(-z-b)."""
        return 1 if self is Branch.SYMMETRIC else -1


@dataclass(frozen=True)
class SpinorProfile:
    """Real spin components Z+(z), Z-(z) of an energy eigenstate, sampled on a z grid."""

    z_samples: np.ndarray
    zplus: np.ndarray
    zminus: np.ndarray
    ell: int
    energy: float
    branch: Branch
    b: float
    epsilon: float

    def density(self) -> np.ndarray:
        return self.zplus ** 2 + self.zminus ** 2

    def norm(self) -> float:
        return float(trapezoid(self.density(), self.z_samples))

    def is_normalized(self, tolerance: float = 1e-8) -> bool:
        return abs(self.norm() - 1.0) < tolerance

    def normalized(self) -> "SpinorProfile":
        scale = 1.0 / np.sqrt(self.norm())
        return SpinorProfile(
            z_samples=self.z_samples,
            zplus=self.zplus * scale,
            zminus=self.zminus * scale,
            ell=self.ell,
            energy=self.energy,
            branch=self.branch,
            b=self.b,
            epsilon=self.epsilon,
        )

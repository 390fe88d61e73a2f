"""Laboratory units <-> scaled units, and physical realization of solutions.

Scaled quantities are taken relative to the cyclotron frequency
``omega = e B / (m* m_e)``:

    E~ = 2 E / (hbar omega),      F~ = e F / sqrt(m* m_e hbar omega^3).

Energies cross the public interface in meV; joules are used internally.
"""

import math
from dataclasses import dataclass

from .errors import DomainError, InfiniteLifetimeError

# CODATA 2018
HBAR = 1.054571817e-34  # J s
ELEMENTARY_CHARGE = 1.602176634e-19  # C
ELECTRON_MASS = 9.1093837015e-31  # kg
JOULE_PER_MEV = ELEMENTARY_CHARGE * 1e-3


@dataclass(frozen=True)
class MaterialParams:
    """Band parameters of the host; only the effective mass ratio varies.

    GaAs (``m*/m_e = 0.067``) is the default.
    """

    effective_mass_ratio: float = 0.067

    def __post_init__(self):
        if not self.effective_mass_ratio > 0:
            raise DomainError("effective_mass_ratio must be positive")

    @property
    def mass(self):
        """Effective mass in kg."""
        return self.effective_mass_ratio * ELECTRON_MASS


GAAS = MaterialParams()


@dataclass(frozen=True)
class ScaledPoint:
    e_tilde: complex
    eb_tilde: float
    f_tilde: float

    def __post_init__(self):
        if not self.eb_tilde < 0:
            raise DomainError("eb_tilde must be negative")
        if not self.f_tilde >= 0:
            raise DomainError("f_tilde must be non-negative")


@dataclass(frozen=True)
class PhysicalScenario:
    """A scaled solution realized for a concrete binding energy.

    Attributes
    ----------
    binding_energy : float
        ``|E_B|`` in meV.
    magnetic_field : float
        Tesla.
    electric_field : float
        V/m.
    cyclotron_quantum : float
        ``hbar omega`` in meV.
    lifetime : float
        Seconds.
    """

    binding_energy: float
    magnetic_field: float
    electric_field: float
    cyclotron_quantum: float
    lifetime: float


def _require_positive(name, value):
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value!r}")


def cyclotron_frequency(b_tesla, mat=GAAS):
    """Cyclotron frequency ``omega = e B / m*`` in rad/s."""
    _require_positive("magnetic field", b_tesla)
    return ELEMENTARY_CHARGE * b_tesla / mat.mass


def field_unit(omega, mat=GAAS):
    """Electric field in V/m that corresponds to ``F~ = 1`` at `omega`."""
    _require_positive("omega", omega)
    return math.sqrt(mat.mass * HBAR * omega**3) / ELEMENTARY_CHARGE


def to_scaled(energy_j, field_v_per_m, omega, mat=GAAS):
    """Map an energy (J) and electric field (V/m) to ``(E~, F~)``."""
    _require_positive("omega", omega)
    return 2.0 * energy_j / (HBAR * omega), field_v_per_m / field_unit(omega, mat)


def from_scaled(e_tilde, f_tilde, omega, mat=GAAS):
    """Inverse of :func:`to_scaled`: ``(E~, F~)`` to energy (J) and field (V/m)."""
    _require_positive("omega", omega)
    return 0.5 * e_tilde * HBAR * omega, f_tilde * field_unit(omega, mat)


def realize_scenario(binding_mev, mat, point):
    """Laboratory fields and lifetime of a scaled resonance.

    The binding energy fixes the field scale, ``hbar omega = 2 |E_B| / |E~_B|``;
    the lifetime is the probability-decay time ``1 / (omega |Im E~|)``.

    Raises
    ------
    InfiniteLifetimeError
        If ``Im e_tilde >= 0`` (a bound state does not decay).
    """
    _require_positive("binding energy", binding_mev)
    if point.eb_tilde >= 0:
        raise DomainError("eb_tilde must be negative")
    width = complex(point.e_tilde).imag
    if width >= 0:
        raise InfiniteLifetimeError("Im e_tilde >= 0: bound state, lifetime is infinite")
    quantum_j = 2.0 * binding_mev * JOULE_PER_MEV / abs(point.eb_tilde)
    omega = quantum_j / HBAR
    return PhysicalScenario(
        binding_energy=float(binding_mev),
        magnetic_field=omega * mat.mass / ELEMENTARY_CHARGE,
        electric_field=point.f_tilde * field_unit(omega, mat),
        cyclotron_quantum=quantum_j / JOULE_PER_MEV,
        lifetime=1.0 / (omega * abs(width)),
    )

"""Physical constants and unit conversions (CODATA values).

Everything internal runs in Hartree atomic units: hbar = 1, energies in
Hartree, lengths in Bohr, masses in electron masses. Conversions to
spectroscopists' units live here and nowhere else.
"""

HARTREE_TO_INVCM = 219474.6313632
"""1 Hartree expressed in wavenumbers (cm^-1)."""

AU_TIME_TO_FS = 0.02418884254
"""One atomic unit of time in femtoseconds."""

SPEED_OF_LIGHT_CM_PER_S = 2.99792458e10
"""Speed of light in cm/s, for Hz <-> cm^-1 conversions."""

ANGSTROM_TO_BOHR = 1.8897259886
"""1 Angstrom in Bohr radii."""

PROTON_MASS_AU = 1836.15267343
"""Proton mass in electron masses."""


def hartree_to_invcm(energy_ha: float) -> float:
    return energy_ha * HARTREE_TO_INVCM


def fs_to_au(t_fs: float) -> float:
    return t_fs / AU_TIME_TO_FS


def au_to_fs(t_au: float) -> float:
    return t_au * AU_TIME_TO_FS

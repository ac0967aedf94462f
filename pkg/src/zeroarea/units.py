"""Conversions between laboratory units and atomic units."""

# CODATA 2018: atomic unit of time = 2.4188843265857e-17 s
AU_TIME_FS = 0.02418884
FS_TO_AU = 1.0 / AU_TIME_FS
# hartree = 219474.6313632 cm^-1
CM1_TO_AU = 4.556335e-6


def fs_to_au(t_fs: float) -> float:
    return t_fs * FS_TO_AU


def au_to_fs(t_au: float) -> float:
    return t_au * AU_TIME_FS


def cm1_to_au(e_cm1: float) -> float:
    return e_cm1 * CM1_TO_AU

"""Unit constants and conversions.

All internal quantities are SI (Pa, m3, s, Pa*s/m3). External
interfaces (scenario files, CSV exports, reports) use mbar, mL and uL;
field names there carry the unit suffix explicitly.
"""

P_ATM = 101325.0  # Pa, absolute ambient pressure

PA_PER_MBAR = 100.0
M3_PER_ML = 1e-6
M3_PER_UL = 1e-9
M3_PER_MM3 = 1e-9
M_PER_MM = 1e-3

# 1 mbar*s/mL in Pa*s/m3
RES_PER_MBAR_S_ML = PA_PER_MBAR / M3_PER_ML
# 1 uL/mbar in m3/Pa
CAP_PER_UL_MBAR = M3_PER_UL / PA_PER_MBAR


def pa_to_mbar(p: float) -> float:
    return p / PA_PER_MBAR


def mbar_to_pa(p: float) -> float:
    return p * PA_PER_MBAR


def m3_to_ul(v: float) -> float:
    return v / M3_PER_UL


def ul_to_m3(v: float) -> float:
    return v * M3_PER_UL


def m3_to_ml(v: float) -> float:
    return v / M3_PER_ML


def ml_to_m3(v: float) -> float:
    return v * M3_PER_ML

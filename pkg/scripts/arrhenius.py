"""Nitrogen Jahn-Teller relaxation rate and T1 versus temperature."""
import numpy as np

from nvbus.core import MEASURED_ROOM_TEMPERATURE_T1_N, jt_relaxation_rate

if __name__ == "__main__":
    print("T_K,rate_per_s,T1_s")
    for T in np.arange(200.0, 320.0, 10.0):
        r = jt_relaxation_rate(T)
        print(f"{T:.0f},{r:.6g},{1 / r:.6g}")
    print(f"# measured room-temperature T1 (kept separately): {MEASURED_ROOM_TEMPERATURE_T1_N} s")

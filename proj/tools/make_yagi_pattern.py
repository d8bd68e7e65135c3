#!/usr/bin/env python3
"""Writes the bundled sample pattern: an 18-element, 11.3 m end-fire array at
144 MHz with horizontal half-wave dipole elements, normalized to a 17.39 dBi
boresight and floored 40 dB below it."""

import argparse
import math

import numpy as np

FREQ_HZ = 144.0e6
BOOM_M = 11.3
ELEMENTS = 18
BORESIGHT_DBI = 17.39
FLOOR_DB = 40.0


def relative_power(az_deg, el_deg):
    az = np.radians(az_deg)
    el = np.radians(el_deg)
    k = 2 * math.pi * FREQ_HZ / 299_792_458.0
    d = BOOM_M / (ELEMENTS - 1)
    # Hansen-Woodyard increased-directivity phasing.
    beta = k * d + math.pi / ELEMENTS
    cos_psi = np.cos(el) * np.cos(az)
    x = k * d * cos_psi - beta
    with np.errstate(invalid="ignore", divide="ignore"):
        af = np.sin(ELEMENTS * x / 2) / (ELEMENTS * np.sin(x / 2))
    af = np.where(np.abs(np.sin(x / 2)) < 1e-12, 1.0, af)
    # Dipoles along the horizontal axis across the boom.
    along = np.sin(az) * np.cos(el)
    with np.errstate(invalid="ignore", divide="ignore"):
        dip = np.cos(math.pi / 2 * along) / np.sqrt(1 - along**2)
    dip = np.where(np.abs(along) > 1 - 1e-12, 0.0, dip)
    return (af * dip) ** 2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="CSV path")
    args = ap.parse_args()

    az = np.arange(-180, 181, 1.0)
    el = np.arange(-90, 91, 5.0)
    azg, elg = np.meshgrid(az, el)
    p = relative_power(azg, elg)
    p = p / relative_power(np.array(0.0), np.array(0.0))
    gain = BORESIGHT_DBI + 10 * np.log10(np.maximum(p, 10 ** (-FLOOR_DB / 10)))
    with open(args.out, "w") as f:
        f.write("az_deg,el_deg,gain_dbi\n")
        for j, e in enumerate(el):
            for i, a in enumerate(az):
                f.write(f"{a:.0f},{e:.0f},{gain[j, i]:.3f}\n")
    row = gain[list(el).index(0.0)]
    print("az=15 fraction", 10 ** ((row[list(az).index(15.0)] - BORESIGHT_DBI) / 10))
    print("max", gain.max(), "half-power az", az[np.argmax((az >= 0) & (row < BORESIGHT_DBI - 3))])


if __name__ == "__main__":
    main()

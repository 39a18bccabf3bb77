"""Small ground-truth testbeds shared by the prematch and acceptance tests."""
import numpy as np

from photosic.channel import ChannelSpec, PathTap, dbm_hz_for_snr
from photosic.frontend import FrontEndParams
from photosic.signals import WaveformSpec
from photosic.testbed import Impairments, Testbed, derived_soi

GEN = 64e9


def ground_truth_testbed(fine_points, gain, *, kind="LFM", center=2.4e9, bw=2e9,
                         duration=2e-6, snr_db=None, multipath=True, soi=True, seed=0,
                         transfer_mode="linearized"):
    """Linearized, ideal-ADC link whose direct path is exactly ``fine_points`` and ``gain``."""
    si = WaveformSpec(kind=kind, center_freq=center, bandwidth_or_baud=bw, duration=duration,
                      symbol_seed=seed)
    direct = PathTap(delay_s=fine_points / GEN, attenuation_db=-20 * np.log10(gain))
    noise = None
    if snr_db is not None:
        # SNR over the SI occupied band, against the direct-path power (unit-peak drive)
        p_direct = gain**2 * (0.5 if kind == "LFM" else 0.25)
        noise = dbm_hz_for_snr(p_direct, snr_db, si.occupied_bandwidth)
    channel = ChannelSpec(direct_path=direct,
                          multipaths=ChannelSpec().multipaths if multipath else (),
                          soi_rel_power_db=-26.0 if soi else None, noise_floor_dbm_hz=noise)
    return Testbed(si, derived_soi(si, seed + 1) if soi else None, channel,
                   FrontEndParams(transfer_mode=transfer_mode), noise_seed=seed,
                   impairments=Impairments())

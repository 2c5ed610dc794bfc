# %% [markdown]
# One channel draw at the default scenario, all three nominal designs side by side.
# Run with `python demos/01_one_channel.py`; takes a few seconds.

# %%
import numpy as np

from risec import dfrc, rcce
from risec.channels import db_to_lin, dbm_to_watt
from risec.config import ScenarioConfig
from risec.experiments import scenario_channel, scenario_noise
from risec.metrics import dfrc_radar_snr, dfrc_rates, rcce_radar_sinr, rcce_rates

cfg = ScenarioConfig()
noise = scenario_noise(cfg)
P = float(dbm_to_watt(cfg.scenario.P_dbm))
gamma = float(db_to_lin(cfg.scenario.gamma_db))
ch = scenario_channel(cfg, trial=0)
print(f"N={ch.N} antennas, M={ch.M} RIS elements, P={cfg.scenario.P_dbm} dBm, gamma={cfg.scenario.gamma_db} dB")

# %% separate radar and communication signals
design, tr = rcce.run_rcce_bcd(ch, noise, P, gamma, rcce.RcceOptions(seed=0))
C_B, C_E, C_s = rcce_rates(design, ch, noise, P)
print(f"rcce       C_s={C_s:6.3f}  C_B={C_B:6.3f}  C_E={C_E:6.3f}  "
      f"radar SINR={10 * np.log10(rcce_radar_sinr(design, ch, noise, P)):5.1f} dB  "
      f"power split eps={design.epsilon:.2f}  iterations={tr.iterations}")
print("  trace:", np.round(tr.cs, 3))

# %% one dual-function beam, two solvers
for name, run in (("dinkelbach", lambda: dfrc.run_dfrc_dinkelbach(ch, noise, P, gamma)),
                  ("rcg", lambda: dfrc.run_dfrc_rcg(ch, noise, P, gamma))):
    d, t = run()
    C_B, C_E, C_s = dfrc_rates(d, ch, noise, P)
    snr = dfrc_radar_snr(d, ch, noise, P)
    print(f"{name:10s} C_s={C_s:6.3f}  C_B={C_B:6.3f}  C_E={C_E:6.3f}  "
          f"radar SNR={10 * np.log10(snr):5.1f} dB  iterations={t.iterations}")
    print("  trace:", np.round(t.cs, 3))

# %% what the surface buys: same channel with every RIS link zeroed
bare = ch.without_ris()
d, _ = rcce.run_rcce_bcd(bare, noise, P, gamma, rcce.RcceOptions(seed=0, optimize_q=False))
print(f"rcce without RIS: C_s={rcce_rates(d, bare, noise, P)[2]:.3f}")

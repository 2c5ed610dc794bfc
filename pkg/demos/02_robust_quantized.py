# %% [markdown]
# Worst-case design when Eve's channel is only known inside a ball, then what
# coarse phase hardware costs. Unit path gains and 0 dBm noise, as in the
# robust defaults. Roughly a minute on one core.

# %%
from risec import robust as rb
from risec.config import ScenarioConfig
from risec.experiments import algo_seed, robust_setup, run_dinkelbach

cfg = ScenarioConfig()
trial = 0
seed = algo_seed(cfg.seed, trial)

# %% exact CSI: the robust design collapses to the nominal one
rs = robust_setup(cfg, trial, eps_bar=0.0, phi_deg=0.0)
design, tr = rb.run_robust_bcd(rs.ch, rs.unc, rs.noise, rs.P, rs.gamma_p, rb.RobustOptions(seed=seed))
ref = run_dinkelbach(rs.ch, rs.noise, rs.P, rs.gamma_p, cfg, seed, radar="illumination",
                     tol=cfg.tolerances.eps_robust)
print(f"eps_bar=0     robust C_s={tr.cs[-1]:.4f}   exact-CSI Dinkelbach C_s={ref.C_s:.4f}")

# %% growing uncertainty
for eps_bar in cfg.sweeps.robust_eps_bar:
    rs = robust_setup(cfg, trial, eps_bar=eps_bar)
    design, tr = rb.run_robust_bcd(rs.ch, rs.unc, rs.noise, rs.P, rs.gamma_p, rb.RobustOptions(seed=seed))
    pr = rb.make_problem(rs.ch, rs.unc, rs.noise, rs.P, rs.gamma_p)
    v_rad, v_leak = rb.audit_constraints(design.W, design.Theta, pr.Ebar, pr.eps_E, pr.gamma_p,
                                         design.kappa, pr.noise, pr.P, n_samples=1000)
    print(f"eps_bar={eps_bar:<5} worst-case C_s={tr.cs[-1]:.4f}  eps_E={rs.unc.eps_E:.3f}  "
          f"audit violations radar={v_rad:.1e} leakage={v_leak:.1e}")

# %% quantize the last design's phases
for bits in cfg.sweeps.quant_bits:
    m, _, _ = rb.quantized_metrics(design.w, design.q, pr, rb.QuantizationSpec(bits))
    print(f"{bits}-bit phases: worst-case C_s={m['C_s']:.4f}  (beamformer refit for the rounded phases)")

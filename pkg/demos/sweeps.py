"""
Monte-Carlo sweeps
==================

Small version of the SNR sweep. The CLI ``risdoa sweep snr_sweep`` produces the
same CSVs at full size.
"""

from risdoa import preset_spec, run_experiment

spec = preset_spec("snr_sweep", trials=10, seed=0)
paths = run_experiment(spec, "sweep_out")
print(paths["aggregate"].read_text())

# plot with:  gnuplot -p plot_rmse.gp

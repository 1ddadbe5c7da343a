"""
GNAF-II against the Jing-Hassibi protocol
=========================================

A short version of the error-rate comparison: the same CIOD relays, the
same power split, with and without the destination listening during the
broadcast phase.  The full-length run lives in plans/fig2_*.json and is
driven through ``gnaf compare``.
"""

from gnaf.analysis import diversity_slope
from gnaf.codes import ciod4_relay_code, rotated_qpsk_codebook
from gnaf.protocol import gnaf_config, jing_hassibi_config
from gnaf.simulator import SimulationPlan, run_plan

grid_db = [5, 10, 15, 20]
grid = [10 ** (d / 10) for d in grid_db]
code = ciod4_relay_code()
codebook = rotated_qpsk_codebook(31.7175, 4, 4)

results = {}
for cfg in (gnaf_config("GNAF-II", 4, 4, 4, 1.0, pi1=4), jing_hassibi_config(4, 4, 1.0, pi1=4, pi3=1)):
    plan = SimulationPlan(cfg, code, codebook, grid, trials_per_point=200_000, seed=7,
                          min_codeword_errors=100)
    results[cfg.variant.value] = run_plan(plan)

print(" dB   GNAF-II cer   JH cer")
for k, d in enumerate(grid_db):
    a = results["GNAF-II"].points[k]
    b = results["JING-HASSIBI"].points[k]
    print(f"{d:3d}   {a.cer:10.2e}   {b.cer:9.2e}")

for name, res in results.items():
    print(f"{name:13s} slope over the top three points: {diversity_slope(res.curve(), 3):.2f}")

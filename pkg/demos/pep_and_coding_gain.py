"""
Pairwise error probability and coding gain
==========================================

For one codeword pair, compare the asymptotic PEP bound, the channel
average it comes from and a direct Monte Carlo estimate.  Then watch the
large-P determinant decomposition converge for a code whose relays use
either A or B but never both.
"""

from pathlib import Path

import numpy as np

from gnaf.analysis import coding_gain, mu_of_code, pairwise_matrix, pep_bound, pep_integral_bound
from gnaf.channel import frame_rng
from gnaf.codes import extract_relay_pairs, parse_design, rotated_qpsk_codebook, theta4_relay_code
from gnaf.protocol import codeword_matrix, gnaf_config
from gnaf.simulator import pairwise_pep_estimate

code = theta4_relay_code()
codebook = rotated_qpsk_codebook(31.7175, 3, 4)
s_i, s_j = codebook.vectors[0], codebook.vectors[5]
mu = mu_of_code(code)

print("     P     rank   bound      average    estimate")
for P in (1e1, 1e2, 1e3):
    cfg = gnaf_config("GNAF-II", 4, 4, 4, P, pi1=4)
    S = codeword_matrix(cfg, code, np.stack([s_i, s_j]))
    m = pairwise_matrix(S[0], S[1], cfg, mu)
    avg = pep_integral_bound(m, cfg, 20_000, frame_rng(1))
    est, lo, hi = pairwise_pep_estimate(cfg, code, s_i, s_j, P, 100_000, seed=2)
    print(f"{P:8.0f}   {m.rank_M}   {pep_bound(m, cfg):9.2e}  {avg:9.2e}  {est:9.2e}")

# The closed form needs every relay to be A-only or B-only
text = (Path(__file__).resolve().parents[1] / "plans" / "restricted.design").read_text()
restricted = extract_relay_pairs(parse_design(text), (0, 1, 2, 3), 4)
restricted = restricted.with_source_pair(0.5 * np.eye(4), np.zeros((4, 4)))
cb4 = rotated_qpsk_codebook(31.7175, 4, 4)
for P in (1e3, 1e5, 1e7):
    cfg = gnaf_config("GNAF-I", 4, 4, 4, P, pi1=4, pi2=1.0)
    out = coding_gain(restricted, cb4.vectors[3], cb4.vectors[200], cfg)
    print(f"P = {P:.0e}: |M| = {out.det_M:.6e}, closed form {out.rhs_large_p:.6e}, relative gap {out.relative_gap:.1e}")

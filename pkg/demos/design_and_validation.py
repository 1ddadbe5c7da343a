"""
From an orthogonal design to relay matrices
===========================================

Build the 4x4 orthogonal design in three symbols, split it into its
unconjugated and conjugated halves, turn each column into a relay matrix
pair and check the rank criterion over a rotated QPSK codebook.
"""

import numpy as np

from gnaf.codes import (
    evaluate_design,
    extended_relay_matrix,
    format_design,
    rotated_qpsk_codebook,
    split_conjugate,
    theta4_design,
    theta4_relay_code,
    validate_code,
)
from gnaf.protocol import gnaf_config, jing_hassibi_config

# The design in the plain-text format understood by parse_design
design = theta4_design()
print(format_design(design))

# Splitting into [C | D] keeps the orthogonality: the Gram matrix is a
# multiple of the identity for any symbol vector
C, D = split_conjugate(design)
x = np.array([0.3 + 1j, -0.7 + 0.2j, 1.1 - 0.4j])
M = evaluate_design(C.hstack(D), x)
print("Gram / energy =\n", np.round(M @ M.conj().T / np.sum(np.abs(x) ** 2), 12).real)

# Column j of the design becomes relay j's pair (A_j, B_j) acting on the
# broadcast vector s = (x0, x1, x2, 0); one common scale keeps every relay
# within its power budget
code = theta4_relay_code()
print("scale =", code.scale, " per-relay power =", code.power_norms())
s = np.append(x, 0)
print("S_ER matches the split design:", np.allclose(extended_relay_matrix(code, s), code.scale * M))

# Rank scan over every pair of the 64-word codebook.  Observing the
# broadcast adds one to the rank, so the same relays reach diversity 5
# under GNAF-II but only 4 when the broadcast phase is discarded.
codebook = rotated_qpsk_codebook(31.7175, 3, 4)
for cfg in (gnaf_config("GNAF-II", 4, 4, 4, 10.0, pi1=4), jing_hassibi_config(4, 4, 10.0, pi1=4, pi3=1)):
    rep = validate_code(code, codebook, cfg)
    print(f"{cfg.variant.value:13s} min rank dS = {rep.min_rank_deltaS}, "
          f"min rank dS_ER = {rep.min_rank_deltaS_er}, diversity {rep.diversity_claim}")

"""PRESENT-80 round 1 and the Hamming-weight leakage it exposes."""
import numpy as np

from presentcema.cipher import encrypt, format_hex, key_schedule_80, round1_sbox_output_byte
from presentcema.leakage import build_hypotheses, hamming_weight
from presentcema.simulate import TARGET_KEY, gen_plaintexts_paper_sweep

# Published test vector: all-zero plaintext and key.
print("E(0, 0) =", format_hex(encrypt(0, 0), 8))

# The round-1 subkey is the top 64 bits of the key register.
rk1 = key_schedule_80(TARGET_KEY)[0]
print("key     =", format_hex(TARGET_KEY, 10, " "))
print("K1      =", format_hex(rk1, 8, " "))

# Intermediate states of the first round.
ct, trace = encrypt(0x0123456789ABCDEF, TARGET_KEY, trace_intermediates=True)
r1 = trace.rounds[0]
for name in ("after_add_round_key", "after_sbox_layer", "after_p_layer"):
    print(f"{name:<20}", format_hex(getattr(r1, name), 8, " "))

# What the attacker models: HW(S(p ^ k)) for one byte.
p, k = 0x00, 0xAC
v = round1_sbox_output_byte(p, k)
print(f"S({p:02X} ^ {k:02X}) = {v:02X}, HW = {hamming_weight(v)}")

# Hypothesis matrix over the 256-block sweep: one row per key guess.
hyp = build_hypotheses(gen_plaintexts_paper_sweep(256), byte_index=0)
print("hypothesis matrix", hyp.values.shape, "row means", np.unique(hyp.values.mean(axis=1)))

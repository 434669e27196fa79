"""PRESENT-80 block cipher with access to every round's intermediate states.

States are plain Python ints. Bit 0 is the least significant bit; byte 0 of a
hex string is the most significant byte of the value it encodes.
"""

from dataclasses import dataclass

SBOX = (0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2)
NUM_ROUNDS = 31
MASK64 = (1 << 64) - 1
MASK80 = (1 << 80) - 1

# byte-wide S-box: both nibbles substituted independently
SBOX_BYTE = tuple((SBOX[b >> 4] << 4) | SBOX[b & 0xF] for b in range(256))


def _player_position(i):
    return 63 if i == 63 else (16 * i) % 63


# _PLAYER_TABLE[j][b]: contribution of byte b sitting at byte position j
# (j = 0 is the least significant byte) after the bit permutation.
_PLAYER_TABLE = tuple(
    tuple(
        sum(1 << _player_position(8 * j + bit) for bit in range(8) if (b >> bit) & 1)
        for b in range(256)
    )
    for j in range(8)
)


def _check_width(value, bits, name):
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"{name} must be an int, got {type(value).__name__}")
    if not 0 <= value < (1 << bits):
        raise ValueError(f"{name} must fit in {bits} bits, got {value:#x}")


def sbox_nibble(x):
    _check_width(x, 4, "nibble")
    return SBOX[x]


def sbox_byte(b):
    _check_width(b, 8, "byte")
    return SBOX_BYTE[b]


def sbox_layer(state):
    _check_width(state, 64, "state")
    out = 0
    for j in range(8):
        out |= SBOX_BYTE[(state >> (8 * j)) & 0xFF] << (8 * j)
    return out


def p_layer(state):
    """Bit permutation: bit i moves to 16*i mod 63, bit 63 stays put."""
    _check_width(state, 64, "state")
    out = 0
    for j in range(8):
        out |= _PLAYER_TABLE[j][(state >> (8 * j)) & 0xFF]
    return out


def add_round_key(state, round_key):
    _check_width(state, 64, "state")
    _check_width(round_key, 64, "round key")
    return state ^ round_key


def key_schedule_80(key):
    """Return the 32 round keys (31 rounds plus final whitening) for an 80-bit key."""
    _check_width(key, 80, "key")
    register = key
    round_keys = []
    for counter in range(1, NUM_ROUNDS + 2):
        round_keys.append(register >> 16)
        register = ((register << 61) | (register >> 19)) & MASK80
        register = (SBOX[register >> 76] << 76) | (register & ((1 << 76) - 1))
        register ^= counter << 15
    return round_keys


@dataclass(frozen=True)
class RoundRecord:
    after_add_round_key: int
    after_sbox_layer: int
    after_p_layer: int


@dataclass(frozen=True)
class EncryptionTrace:
    rounds: tuple  # 31 RoundRecord entries, round 1 first
    final: int

    def __post_init__(self):
        if len(self.rounds) != NUM_ROUNDS:
            raise ValueError(f"expected {NUM_ROUNDS} round records, got {len(self.rounds)}")


def encrypt(plaintext, key, trace_intermediates=False):
    """Encrypt one 64-bit block under an 80-bit key.

    With ``trace_intermediates`` the result is ``(ciphertext, EncryptionTrace)``.
    """
    _check_width(plaintext, 64, "plaintext")
    round_keys = key_schedule_80(key)
    state = plaintext
    records = []
    for rk in round_keys[:NUM_ROUNDS]:
        keyed = state ^ rk
        substituted = sbox_layer(keyed)
        state = p_layer(substituted)
        if trace_intermediates:
            records.append(RoundRecord(keyed, substituted, state))
    ciphertext = state ^ round_keys[NUM_ROUNDS]
    if trace_intermediates:
        return ciphertext, EncryptionTrace(tuple(records), ciphertext)
    return ciphertext


def round1_sbox_output_byte(pt_byte, key_byte):
    """The attacked intermediate: S-box output of one byte after the first key addition."""
    _check_width(pt_byte, 8, "plaintext byte")
    _check_width(key_byte, 8, "key byte")
    return SBOX_BYTE[pt_byte ^ key_byte]


# --- hex / byte helpers -----------------------------------------------------

def parse_hex(text, num_bytes):
    """Parse a big-endian hex string (spaces allowed) of exactly ``num_bytes`` bytes."""
    cleaned = "".join(text.split())
    if cleaned.lower().startswith("0x"):
        cleaned = cleaned[2:]
    if len(cleaned) != 2 * num_bytes:
        raise ValueError(f"expected {2 * num_bytes} hex digits, got {len(cleaned)}: {text!r}")
    try:
        return int(cleaned, 16)
    except ValueError:
        raise ValueError(f"not a hex string: {text!r}") from None


def parse_key(text):
    return parse_hex(text, 10)


def format_hex(value, num_bytes, sep=""):
    raw = value.to_bytes(num_bytes, "big")
    return sep.join(f"{b:02X}" for b in raw)


def int_to_bytes64(value):
    return list(value.to_bytes(8, "big"))


def bytes_to_int(block):
    return int.from_bytes(bytes(block), "big")


def round1_subkey_bytes(key):
    """The 8 bytes of the first round key, most significant first."""
    _check_width(key, 80, "key")
    return int_to_bytes64(key >> 16)

"""
Project-wide constants for can_pqc_sim.
Keep CAN field widths, presets and protocol defaults here to avoid drift.
"""

MAX_STANDARD_ID: int = 0x7FF
MAX_DLC: int = 8

# SOF + ID + RTR + IDE + r0 + DLC + CRC + CRC delimiter + ACK + ACK delimiter + EOF
FIXED_FRAME_BITS: int = 1 + 11 + 1 + 1 + 1 + 4 + 15 + 1 + 1 + 1 + 7
INTERFRAME_SPACE_BITS: int = 3
# SOF through the CRC sequence, excluding data
STUFFABLE_FIXED_BITS: int = 1 + 11 + 1 + 1 + 1 + 4 + 15
MAX_STUFFING_FRACTION: float = 0.25
DEFAULT_STUFFING_FRACTION: float = 0.05

NS_PER_SECOND: int = 1_000_000_000
NS_PER_MS: int = 1_000_000

BIT_RATE_125K: int = 125_000
BIT_RATE_500K: int = 500_000
BIT_RATE_1M: int = 1_000_000

CPU_HZ_LOW: int = 120_000_000
CPU_HZ_MID: int = 200_000_000
CPU_HZ_HIGH: int = 300_000_000

# Transport
FIRST_FRAME_MARKER: int = 0x10
FIRST_FRAME_PAYLOAD: int = 3
CONSECUTIVE_FRAME_PAYLOAD: int = 7
MAX_PAYLOAD_LENGTH: int = 2 ** 32 - 1
PADDING_BYTE: int = 0x00

# Protocol defaults
DEFAULT_ALICE_ID: int = 0x010
DEFAULT_BOB_ID: int = 0x011
INVERTED_ALICE_ID: int = 0x7F0
INVERTED_BOB_ID: int = 0x7F1
DEFAULT_RECEIVER_TIMEOUT_NS: int = 2 * NS_PER_SECOND
DSA_MESSAGE_LENGTH: int = 32

# Background traffic
BACKGROUND_ID_LOW: int = 0x100
BACKGROUND_ID_HIGH: int = 0x7FF
INVERTED_BACKGROUND_ID_HIGH: int = 0x7EF
BACKGROUND_LOAD_TOLERANCE: float = 0.02

# Campaign
ITERATIONS_DEFAULT: int = 100
MASTER_SEED_DEFAULT: int = 2025
SCALING_TOLERANCE: float = 0.10
MAD_Z_THRESHOLD: float = 3.5

KEM_OPS = ("keygen", "encapsulate", "decapsulate")
DSA_OPS = ("keygen", "sign", "verify")
OPTIONAL_OPS = ("message",)

ECU_CONFIG_NAMES = ("high", "mid", "low")

"""
Published operating point of the 428 km field test and protocol-wide labels.
"""

# Alice's and Bob's source labels in the order used by the sent/gain table
ALICE_LABELS = ['Z_AO', 'X_AO', 'X_A1', 'Z_A']
BOB_LABELS = ['Z_BO', 'X_BO', 'X_B1', 'Z_B']

# Source intensities, send probabilities and pulse count (key length table)
PUBLISHED_PROTOCOL = {
    'mu_a1': 0.042,
    'mu_b1': 0.029,
    'mu_a2': 0.454,
    'mu_b2': 0.425,
    'eps_a': 0.307,
    'eps_b': 0.241,
    # not published; recovered from the sent counts below
    'p_a1': 0.906867,
    'p_b1': 0.907910,
    'p_a2': 0.819000,
    'p_b2': 0.818500,
    'lam': 0.0196,
    'n_total': 5590517734411,
    'f': 1.1,
    'eps_sec': 1e-10,
}

# Device and link parameters used for the simulation curve
PUBLISHED_CHANNEL = {
    'alpha_ac': 0.182,
    'alpha_bc': 0.188,
    'l_ac': 223.0,
    'l_bc': 205.0,
    'eta_d': 0.282,
    'p_dark': 2.5e-8,
    'e_dx': 0.08,
    'drift_rate': 7.80,
    'mu_ref': 450.0,
    't_est': 20.0,
}

# (sent, gain) per cell, keyed by "<alice> <bob>"
PUBLISHED_COUNTS = {
    'Z_AO Z_BO': (1971056824075, 91307),
    'Z_AO X_BO': (53109918477, 2506),
    'Z_AO X_B1': (523112730863, 622318),
    'Z_AO Z_B': (626936631645, 10353195),
    'X_AO Z_BO': (58301113516, 2666),
    'X_AO X_BO': (1597290781, 75),
    'X_AO X_B1': (15573585117, 18484),
    'X_AO Z_B': (18768166680, 309128),
    'X_A1 Z_BO': (569833486215, 632696),
    'X_A1 X_BO': (15174262422, 17086),
    'X_A1 X_B1': (151343301524, 343572),
    'X_A1 Z_B': (181292503673, 3234733),
    'Z_A Z_BO': (872120766568, 9794704),
    'Z_A X_BO': (23560039024, 265688),
    'Z_A X_B1': (231207840587, 2823218),
    'Z_A Z_B': (277529273244, 7682102),
}

PUBLISHED_X_EFFECTIVE = 43382
PUBLISHED_X_QBER = 0.0962

# Headline results the replay is checked against
PUBLISHED_RESULTS = {
    'n_t': 27921308,
    'E': 0.2784,
    'n1': 1.29e7,
    'e1ph': 0.1107,
    'nt_prime': 5.84e6,
    'E_prime': 0.0069,
    'n1_prime': 2.38e6,
    'e1ph_prime': 0.2024,
    'rate': 4.80e-8,
    'rate_bps': 3.36,
    'plob_absolute': 1.78e-8,
    'plob_relative': 5.01e-9,
}

# Exit codes of the command-line entry point
EXIT_CODES = {
    'OK': 0,
    'INPUT_ERROR': 2,
    'INFEASIBLE': 3,
}

RUN_MODES = ['replay', 'simulate', 'optimize', 'sweep']

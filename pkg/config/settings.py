import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    # Logging / output
    LOG_LEVEL = os.getenv('QKD_LOG_LEVEL', 'INFO').upper()
    OUTPUT_DIR = os.getenv('QKD_OUTPUT_DIR', 'output')

    # Timing (used only for bits-per-second conversion and phase drift)
    CLOCK_HZ = float(os.getenv('QKD_CLOCK_HZ', 312.5e6))
    DUTY_FACTOR = float(os.getenv('QKD_DUTY_FACTOR', 0.224))

    # Statistics
    CHERNOFF_FORM = os.getenv('QKD_CHERNOFF_FORM', 'multiplicative').lower()

    # Simulation
    SEED = int(os.getenv('QKD_SEED', 20210101))
    BLOCK_SIZE = int(os.getenv('QKD_BLOCK_SIZE', 65536))
    STRING_CAP = int(float(os.getenv('QKD_STRING_CAP', 2e7)))
    DRIFT_MODEL = os.getenv('QKD_DRIFT_MODEL', 'wiener').lower()

    @property
    def simulation_config(self):
        return {
            'seed': self.SEED,
            'block_size': self.BLOCK_SIZE,
            'string_cap': self.STRING_CAP,
            'drift_model': self.DRIFT_MODEL,
            'clock_hz': self.CLOCK_HZ,
        }

config = Config()
